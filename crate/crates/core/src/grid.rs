//! Dense voxel grids on a Cartesian region of interest.
//!
//! Values live at cell centers: cell `(i, j, k)` is centered at
//! `origin + (i + 0.5) * spacing` per axis. The linearization is fixed:
//! `flat = ((i_x * N_y) + i_y) * N_z + i_z`, with the channel index
//! outermost. On disk a grid is a JSON sidecar (`<prefix>.json`) plus a raw
//! little-endian `f32` payload (`<prefix>.bin`) in the same order.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LINEARIZATION: &str = "x-major-then-y-then-z";
pub const DTYPE: &str = "f32-little-endian";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid ROI: {0}")]
    InvalidRoi(String),
    #[error("data length {got} does not match shape*channels = {expected}")]
    DataLength { got: usize, expected: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([usize; 3], [usize; 3]),
    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("standard deviation must be > 0, got {0}")]
    NonPositiveStd(f64),
    #[error("unknown resolution tag `{0}` (expected R128, R256, or R512)")]
    UnknownResolution(String),
    #[error("grid file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("sidecar parse error on {path}: {source}")]
    Sidecar {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Axis-aligned region of interest in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub origin: [f64; 3],
    pub extent: [f64; 3],
}

impl Roi {
    pub fn new(origin: [f64; 3], extent: [f64; 3]) -> Result<Self, GridError> {
        if extent.iter().any(|&e| !(e > 0.0)) {
            return Err(GridError::InvalidRoi(format!(
                "extents must be positive, got {extent:?}"
            )));
        }
        if origin.iter().chain(extent.iter()).any(|v| !v.is_finite()) {
            return Err(GridError::InvalidRoi("non-finite ROI values".into()));
        }
        Ok(Self { origin, extent })
    }

    /// Reference vehicle ROI: 9.28 m x 3.84 m x 2.66 m, anchored at the
    /// origin. By convention the vehicle nose sits 1.0 m downstream of the
    /// low-x face, the road plane is z = 0, and the vehicle is laterally
    /// centered; anchoring to a specific vehicle is the caller's job.
    pub fn vehicle_default() -> Self {
        Self {
            origin: [0.0, 0.0, 0.0],
            extent: [9.28, 3.84, 2.66],
        }
    }

    pub fn spacing(&self, shape: [usize; 3]) -> [f64; 3] {
        [
            self.extent[0] / shape[0] as f64,
            self.extent[1] / shape[1] as f64,
            self.extent[2] / shape[2] as f64,
        ]
    }

    pub fn cell_center(&self, shape: [usize; 3], i: usize, j: usize, k: usize) -> Point3<f64> {
        let s = self.spacing(shape);
        Point3::new(
            self.origin[0] + (i as f64 + 0.5) * s[0],
            self.origin[1] + (j as f64 + 0.5) * s[1],
            self.origin[2] + (k as f64 + 0.5) * s[2],
        )
    }
}

/// The three reference grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    R128,
    R256,
    R512,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::R128, Resolution::R256, Resolution::R512];

    pub fn shape(self) -> [usize; 3] {
        match self {
            Resolution::R128 => [128, 32, 32],
            Resolution::R256 => [256, 64, 64],
            Resolution::R512 => [512, 128, 128],
        }
    }

    pub fn cell_count(self) -> usize {
        let [x, y, z] = self.shape();
        x * y * z
    }

    /// Resolution level index used by schedules: R128 -> 0, R512 -> 2.
    pub fn level(self) -> usize {
        match self {
            Resolution::R128 => 0,
            Resolution::R256 => 1,
            Resolution::R512 => 2,
        }
    }

    pub fn from_level(level: usize) -> Option<Self> {
        Self::ALL.get(level).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::R128 => "R128",
            Resolution::R256 => "R256",
            Resolution::R512 => "R512",
        }
    }
}

impl std::str::FromStr for Resolution {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "R128" | "r128" => Ok(Resolution::R128),
            "R256" | "r256" => Ok(Resolution::R256),
            "R512" | "r512" => Ok(Resolution::R512),
            other => Err(GridError::UnknownResolution(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldTag {
    Sdf,
    Usdf,
    Mask,
    Velocity,
    Weight,
    Other,
}

/// Normalization constants attached to a z-normalized grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZNorm {
    pub mean: f64,
    pub std: f64,
}

/// Dense multi-channel scalar field on a [`Roi`].
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    shape: [usize; 3],
    channels: usize,
    pub roi: Roi,
    pub tag: FieldTag,
    /// Set when the grid has been z-normalized.
    pub norm: Option<ZNorm>,
    data: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(shape: [usize; 3], channels: usize, roi: Roi, tag: FieldTag) -> Self {
        Self {
            shape,
            channels,
            roi,
            tag,
            norm: None,
            data: vec![0.0; shape[0] * shape[1] * shape[2] * channels],
        }
    }

    pub fn from_data(
        shape: [usize; 3],
        channels: usize,
        roi: Roi,
        tag: FieldTag,
        data: Vec<f64>,
    ) -> Result<Self, GridError> {
        let expected = shape[0] * shape[1] * shape[2] * channels;
        if data.len() != expected {
            return Err(GridError::DataLength {
                got: data.len(),
                expected,
            });
        }
        Ok(Self {
            shape,
            channels,
            roi,
            tag,
            norm: None,
            data,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cell_count(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.roi.spacing(self.shape)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        self.roi.cell_center(self.shape, i, j, k)
    }

    #[inline]
    pub fn index(&self, channel: usize, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(channel < self.channels && i < self.shape[0] && j < self.shape[1] && k < self.shape[2]);
        channel * self.cell_count() + (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn get(&self, channel: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(channel, i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, channel: usize, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(channel, i, j, k);
        self.data[idx] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One channel's contiguous slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.cell_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn same_layout(&self, other: &VoxelGrid) -> Result<(), GridError> {
        if self.shape != other.shape {
            return Err(GridError::ShapeMismatch(self.shape, other.shape));
        }
        if self.channels != other.channels {
            return Err(GridError::ChannelMismatch {
                expected: self.channels,
                got: other.channels,
            });
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        crate::numeric::pairwise_mean(&self.data)
    }

    /// Trilinear interpolation of a single-channel grid at a physical
    /// point, clamped to the cell-center lattice at the boundary.
    pub fn sample_trilinear(&self, channel: usize, p: Point3<f64>) -> f64 {
        let s = self.spacing();
        let mut idx = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            // Continuous cell-center coordinate: center of cell i is at i.
            let t = (p[a] - self.roi.origin[a]) / s[a] - 0.5;
            let max_i = self.shape[a] - 1;
            let clamped = t.clamp(0.0, max_i as f64);
            let lo = (clamped.floor() as usize).min(max_i.saturating_sub(1));
            idx[a] = lo;
            frac[a] = (clamped - lo as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for (di, wi) in [(0, 1.0 - frac[0]), (1, frac[0])] {
            for (dj, wj) in [(0, 1.0 - frac[1]), (1, frac[1])] {
                for (dk, wk) in [(0, 1.0 - frac[2]), (1, frac[2])] {
                    let i = (idx[0] + di).min(self.shape[0] - 1);
                    let j = (idx[1] + dj).min(self.shape[1] - 1);
                    let k = (idx[2] + dk).min(self.shape[2] - 1);
                    acc += wi * wj * wk * self.get(channel, i, j, k);
                }
            }
        }
        acc
    }
}

/// Extra key/values a producer may attach to a sidecar for audit.
pub type SidecarExtras = serde_json::Map<String, serde_json::Value>;

/// JSON sidecar describing a grid payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSidecar {
    pub shape: [usize; 3],
    pub channels: usize,
    pub roi: Roi,
    pub field_tag: FieldTag,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub linearization: String,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "SidecarExtras::is_empty")]
    pub extras: SidecarExtras,
}

fn io_err(path: &Path, source: std::io::Error) -> GridError {
    GridError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `<prefix>.json` + `<prefix>.bin`.
pub fn write_grid(
    prefix: &Path,
    grid: &VoxelGrid,
    seed: Option<u64>,
    extras: SidecarExtras,
) -> Result<(), GridError> {
    let sidecar = GridSidecar {
        shape: grid.shape,
        channels: grid.channels,
        roi: grid.roi,
        field_tag: grid.tag,
        mean: grid.norm.map(|n| n.mean),
        std: grid.norm.map(|n| n.std),
        linearization: LINEARIZATION.to_string(),
        dtype: DTYPE.to_string(),
        seed,
        extras,
    };
    let json_path = prefix.with_extension("json");
    let bin_path = prefix.with_extension("bin");

    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serialization");
    fs::write(&json_path, json).map_err(|e| io_err(&json_path, e))?;

    let mut payload = Vec::with_capacity(grid.data.len() * 4);
    for &v in &grid.data {
        payload
            .write_all(&(v as f32).to_le_bytes())
            .map_err(|e| io_err(&bin_path, e))?;
    }
    fs::write(&bin_path, payload).map_err(|e| io_err(&bin_path, e))
}

/// Read a grid written by [`write_grid`]. Accepts the bare prefix or the
/// path to either of the two files.
pub fn read_grid(prefix: &Path) -> Result<(VoxelGrid, GridSidecar), GridError> {
    let base = match prefix.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => prefix.with_extension(""),
        _ => prefix.to_path_buf(),
    };
    let json_path = base.with_extension("json");
    let bin_path = base.with_extension("bin");

    let text = fs::read(&json_path).map_err(|e| io_err(&json_path, e))?;
    let sidecar: GridSidecar = serde_json::from_slice(&text).map_err(|e| GridError::Sidecar {
        path: json_path.clone(),
        source: e,
    })?;
    if sidecar.linearization != LINEARIZATION {
        return Err(GridError::Format {
            path: json_path.clone(),
            msg: format!("unsupported linearization `{}`", sidecar.linearization),
        });
    }
    if sidecar.dtype != DTYPE {
        return Err(GridError::Format {
            path: json_path.clone(),
            msg: format!("unsupported dtype `{}`", sidecar.dtype),
        });
    }

    let bytes = fs::read(&bin_path).map_err(|e| io_err(&bin_path, e))?;
    let expected =
        sidecar.shape[0] * sidecar.shape[1] * sidecar.shape[2] * sidecar.channels * 4;
    if bytes.len() != expected {
        return Err(GridError::Format {
            path: bin_path,
            msg: format!(
                "payload is {} bytes, expected {expected} for shape {:?} x {} channels",
                bytes.len(),
                sidecar.shape,
                sidecar.channels
            ),
        });
    }
    let mut data = Vec::with_capacity(bytes.len() / 4);
    let mut cursor = &bytes[..];
    let mut buf = [0u8; 4];
    while cursor.read_exact(&mut buf).is_ok() {
        data.push(f32::from_le_bytes(buf) as f64);
    }
    let mut grid = VoxelGrid::from_data(
        sidecar.shape,
        sidecar.channels,
        sidecar.roi,
        sidecar.field_tag,
        data,
    )?;
    if let (Some(mean), Some(std)) = (sidecar.mean, sidecar.std) {
        grid.norm = Some(ZNorm { mean, std });
    }
    Ok((grid, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_roi() -> Roi {
        Roi::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn roi_rejects_degenerate_extent() {
        assert!(Roi::new([0.0; 3], [1.0, 0.0, 1.0]).is_err());
        assert!(Roi::new([0.0; 3], [1.0, -2.0, 1.0]).is_err());
    }

    #[test]
    fn resolution_shapes() {
        assert_eq!(Resolution::R128.shape(), [128, 32, 32]);
        assert_eq!(Resolution::R256.shape(), [256, 64, 64]);
        assert_eq!(Resolution::R512.shape(), [512, 128, 128]);
        assert_eq!("R512".parse::<Resolution>().unwrap(), Resolution::R512);
        assert!("R64".parse::<Resolution>().is_err());
    }

    #[test]
    fn linearization_is_x_major_channel_outermost() {
        let mut g = VoxelGrid::zeros([2, 3, 4], 2, unit_roi(), FieldTag::Other);
        assert_eq!(g.index(0, 0, 0, 0), 0);
        assert_eq!(g.index(0, 0, 0, 1), 1);
        assert_eq!(g.index(0, 0, 1, 0), 4);
        assert_eq!(g.index(0, 1, 0, 0), 12);
        assert_eq!(g.index(1, 0, 0, 0), 24);
        g.set(1, 1, 2, 3, 7.5);
        assert_eq!(g.data()[24 + 12 + 8 + 3], 7.5);
    }

    #[test]
    fn cell_centers_follow_half_offset_convention() {
        let roi = Roi::new([1.0, 0.0, -1.0], [2.0, 2.0, 2.0]).unwrap();
        let g = VoxelGrid::zeros([4, 4, 4], 1, roi, FieldTag::Other);
        let c = g.cell_center(0, 0, 0);
        assert!((c.x - 1.25).abs() < 1e-15);
        assert!((c.y - 0.25).abs() < 1e-15);
        assert!((c.z + 0.75).abs() < 1e-15);
    }

    #[test]
    fn trilinear_reproduces_linear_fields() {
        // A trilinear interpolant is exact on linear functions.
        let roi = unit_roi();
        let mut g = VoxelGrid::zeros([8, 8, 8], 1, roi, FieldTag::Other);
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    let p = g.cell_center(i, j, k);
                    g.set(0, i, j, k, 2.0 * p.x - 3.0 * p.y + 0.5 * p.z + 1.0);
                }
            }
        }
        for &(x, y, z) in &[(0.41, 0.52, 0.63), (0.2, 0.8, 0.5), (0.5, 0.5, 0.5)] {
            let p = Point3::new(x, y, z);
            let want = 2.0 * x - 3.0 * y + 0.5 * z + 1.0;
            assert!((g.sample_trilinear(0, p) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("field");
        let mut g = VoxelGrid::zeros([3, 2, 2], 2, unit_roi(), FieldTag::Velocity);
        for (i, v) in g.data_mut().iter_mut().enumerate() {
            *v = i as f64 * 0.25 - 1.0;
        }
        write_grid(&prefix, &g, Some(42), SidecarExtras::new()).unwrap();

        let (back, sidecar) = read_grid(&prefix).unwrap();
        assert_eq!(back.shape(), [3, 2, 2]);
        assert_eq!(back.channels(), 2);
        assert_eq!(sidecar.seed, Some(42));
        assert_eq!(sidecar.linearization, LINEARIZATION);
        // f32 payload: exact for these values.
        assert_eq!(back.data(), g.data());

        // Reading via the sidecar path works too.
        let (again, _) = read_grid(&prefix.with_extension("json")).unwrap();
        assert_eq!(again.data(), g.data());
    }

    #[test]
    fn read_grid_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("bad");
        let g = VoxelGrid::zeros([2, 2, 2], 1, unit_roi(), FieldTag::Sdf);
        write_grid(&prefix, &g, None, SidecarExtras::new()).unwrap();
        let bin = prefix.with_extension("bin");
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_grid(&prefix), Err(GridError::Format { .. })));
    }
}
