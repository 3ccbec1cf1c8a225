//! Triangle meshes: STL/OBJ loading and procedural primitives.
//!
//! Loading deduplicates vertices within 1e-9 m and drops degenerate
//! (zero-area) triangles, reporting both counts. Watertightness is not
//! required anywhere, but the winding-number sign used by SDF voxelization
//! degrades on meshes with large holes.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

/// Vertex dedup tolerance in meters.
pub const DEDUP_TOL: f64 = 1e-9;
/// Triangles with less area than this (m^2) are dropped at load time.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("truncated binary STL: header declares {expected} triangles, payload holds {actual}")]
    TruncatedStl { expected: usize, actual: usize },
    #[error("mesh is empty after filtering")]
    Empty,
    #[error("non-finite vertex coordinate")]
    NonFinite,
    #[error("triangle index {index} out of range for {vertices} vertices")]
    IndexOutOfRange { index: usize, vertices: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    Obj,
}

/// Indexed triangle mesh with coordinates in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

/// What load-time filtering removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeshLoadReport {
    pub degenerate_dropped: usize,
    pub duplicates_merged: usize,
}

impl TriangleMesh {
    /// Build from raw data, validating indices and finiteness.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if vertices
            .iter()
            .any(|v| !v.coords.iter().all(|c| c.is_finite()))
        {
            return Err(MeshError::NonFinite);
        }
        for tri in &triangles {
            for &i in tri {
                if i as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        index: i as usize,
                        vertices: vertices.len(),
                    });
                }
            }
        }
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Twice the area vector: `(b - a) x (c - a)`.
    pub fn area_vector(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle_vertices(t);
        (b - a).cross(&(c - a))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        0.5 * self.area_vector(t).norm()
    }

    /// Unit face normal following the authored winding.
    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let v = self.area_vector(t);
        let n = v.norm();
        if n > 0.0 {
            v / n
        } else {
            Vector3::zeros()
        }
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn vertex_centroid(&self) -> Point3<f64> {
        let mut acc = Vector3::zeros();
        for v in &self.vertices {
            acc += v.coords;
        }
        Point3::from(acc / self.vertices.len() as f64)
    }

    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    pub fn translate(&mut self, offset: Vector3<f64>) {
        for v in &mut self.vertices {
            *v += offset;
        }
    }

    pub fn scale_about_origin(&mut self, factor: f64) {
        for v in &mut self.vertices {
            v.coords *= factor;
        }
    }

    /// Reverse every triangle's winding.
    pub fn flip_windings(&mut self) {
        for tri in &mut self.triangles {
            tri.swap(1, 2);
        }
    }
}

/// Merge soup vertices within [`DEDUP_TOL`] and drop degenerate triangles.
pub fn index_soup(soup: &[[Point3<f64>; 3]]) -> Result<(TriangleMesh, MeshLoadReport), MeshError> {
    let quantize = |p: &Point3<f64>| -> Result<[i64; 3], MeshError> {
        let mut q = [0i64; 3];
        for a in 0..3 {
            if !p[a].is_finite() {
                return Err(MeshError::NonFinite);
            }
            q[a] = (p[a] / DEDUP_TOL).round() as i64;
        }
        Ok(q)
    };

    let mut lookup: HashMap<[i64; 3], u32> = HashMap::new();
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut report = MeshLoadReport::default();

    for tri in soup {
        let mut idx = [0u32; 3];
        for (slot, p) in idx.iter_mut().zip(tri) {
            let key = quantize(p)?;
            *slot = *lookup.entry(key).or_insert_with(|| {
                vertices.push(*p);
                (vertices.len() - 1) as u32
            });
        }
        if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
            report.degenerate_dropped += 1;
            continue;
        }
        let [a, b, c] = [
            vertices[idx[0] as usize],
            vertices[idx[1] as usize],
            vertices[idx[2] as usize],
        ];
        if 0.5 * (b - a).cross(&(c - a)).norm() < DEGENERATE_AREA {
            report.degenerate_dropped += 1;
            continue;
        }
        triangles.push(idx);
    }
    report.duplicates_merged = 3 * soup.len() - vertices.len();
    if triangles.is_empty() {
        return Err(MeshError::Empty);
    }
    Ok((TriangleMesh::new(vertices, triangles)?, report))
}

/// Load a mesh file in the given format.
pub fn load_mesh(
    path: &Path,
    format: MeshFormat,
) -> Result<(TriangleMesh, MeshLoadReport), MeshError> {
    let bytes = fs::read(path).map_err(|e| MeshError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_mesh(&bytes, format)
}

/// Guess the format from the extension, sniffing STL for ASCII vs binary.
pub fn detect_format(path: &Path, bytes: &[u8]) -> MeshFormat {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    if ext.as_deref() == Some("obj") {
        return MeshFormat::Obj;
    }
    // ASCII STL starts with "solid" and mentions "facet" early on; a binary
    // header that merely starts with "solid" will not.
    let head = &bytes[..bytes.len().min(1024)];
    if head.starts_with(b"solid") && head.windows(5).any(|w| w == b"facet") {
        MeshFormat::StlAscii
    } else {
        MeshFormat::StlBinary
    }
}

/// Parse mesh bytes in the given format.
pub fn parse_mesh(
    bytes: &[u8],
    format: MeshFormat,
) -> Result<(TriangleMesh, MeshLoadReport), MeshError> {
    let soup = match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(bytes)?,
        MeshFormat::Obj => return parse_obj(bytes),
    };
    index_soup(&soup)
}

fn parse_stl_binary(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>, MeshError> {
    const HEADER: usize = 80;
    const TRI: usize = 50;
    if bytes.len() < HEADER + 4 {
        return Err(MeshError::Parse {
            offset: bytes.len(),
            msg: "file shorter than the 84-byte binary STL preamble".into(),
        });
    }
    let declared = u32::from_le_bytes(bytes[HEADER..HEADER + 4].try_into().unwrap()) as usize;
    let available = (bytes.len() - HEADER - 4) / TRI;
    if available < declared {
        return Err(MeshError::TruncatedStl {
            expected: declared,
            actual: available,
        });
    }
    let mut soup = Vec::with_capacity(declared);
    for t in 0..declared {
        let base = HEADER + 4 + t * TRI;
        let f = |off: usize| -> f64 {
            f32::from_le_bytes(bytes[base + off..base + off + 4].try_into().unwrap()) as f64
        };
        // 12 bytes facet normal (ignored, recomputed from vertices), then
        // three vertices, then the attribute byte count.
        let mut tri = [Point3::origin(); 3];
        for (v, p) in tri.iter_mut().enumerate() {
            let off = 12 + v * 12;
            *p = Point3::new(f(off), f(off + 4), f(off + 8));
        }
        soup.push(tri);
    }
    Ok(soup)
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<Vec<[Point3<f64>; 3]>, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
        offset: e.valid_up_to(),
        msg: "ASCII STL is not valid UTF-8".into(),
    })?;
    let mut soup = Vec::new();
    let mut pending: Vec<Point3<f64>> = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        let mut tokens = line.trim().split_whitespace();
        match tokens.next() {
            Some("vertex") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens.next().ok_or(MeshError::Parse {
                        offset,
                        msg: "vertex line with fewer than 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse {
                        offset,
                        msg: format!("invalid vertex coordinate `{tok}`"),
                    })?;
                }
                pending.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("endfacet") => {
                if pending.len() != 3 {
                    return Err(MeshError::Parse {
                        offset,
                        msg: format!("facet closed with {} vertices, expected 3", pending.len()),
                    });
                }
                soup.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            }
            _ => {}
        }
        offset += line.len() + 1;
    }
    if !pending.is_empty() {
        return Err(MeshError::Parse {
            offset,
            msg: "file ends inside a facet".into(),
        });
    }
    Ok(soup)
}

fn parse_obj(bytes: &[u8]) -> Result<(TriangleMesh, MeshLoadReport), MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
        offset: e.valid_up_to(),
        msg: "OBJ is not valid UTF-8".into(),
    })?;
    let mut raw_vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<Vec<usize>> = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        let mut tokens = line.trim().split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens.next().ok_or(MeshError::Parse {
                        offset,
                        msg: "v line with fewer than 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse {
                        offset,
                        msg: format!("invalid vertex coordinate `{tok}`"),
                    })?;
                }
                raw_vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in tokens {
                    // Accept v, v/vt, v//vn, v/vt/vn; only the position
                    // index matters here.
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: i64 = first.parse().map_err(|_| MeshError::Parse {
                        offset,
                        msg: format!("invalid face index `{tok}`"),
                    })?;
                    let resolved = if idx > 0 {
                        (idx - 1) as usize
                    } else if idx < 0 {
                        // Negative indices count back from the latest vertex.
                        let r = raw_vertices.len() as i64 + idx;
                        if r < 0 {
                            return Err(MeshError::Parse {
                                offset,
                                msg: format!("negative face index `{idx}` out of range"),
                            });
                        }
                        r as usize
                    } else {
                        return Err(MeshError::Parse {
                            offset,
                            msg: "face index 0 is invalid in OBJ".into(),
                        });
                    };
                    if resolved >= raw_vertices.len() {
                        return Err(MeshError::Parse {
                            offset,
                            msg: format!(
                                "face index {idx} exceeds {} vertices",
                                raw_vertices.len()
                            ),
                        });
                    }
                    face.push(resolved);
                }
                if face.len() < 3 {
                    return Err(MeshError::Parse {
                        offset,
                        msg: format!("face with {} vertices", face.len()),
                    });
                }
                faces.push(face);
            }
            _ => {}
        }
        offset += line.len() + 1;
    }
    // Fan-triangulate polygons, then run the shared dedup/degeneracy pass.
    let mut soup = Vec::new();
    for face in faces {
        for i in 1..face.len() - 1 {
            soup.push([
                raw_vertices[face[0]],
                raw_vertices[face[i]],
                raw_vertices[face[i + 1]],
            ]);
        }
    }
    index_soup(&soup)
}

/// Procedural meshes used by the harness and the test suites.
pub mod primitives {
    use super::*;

    /// Axis-aligned box `[center - half, center + half]`, 12 triangles with
    /// outward windings.
    pub fn box_mesh(center: Point3<f64>, half_extents: Vector3<f64>) -> TriangleMesh {
        let h = half_extents;
        let corner = |sx: f64, sy: f64, sz: f64| {
            Point3::new(
                center.x + sx * h.x,
                center.y + sy * h.y,
                center.z + sz * h.z,
            )
        };
        let v = [
            corner(-1.0, -1.0, -1.0),
            corner(1.0, -1.0, -1.0),
            corner(1.0, 1.0, -1.0),
            corner(-1.0, 1.0, -1.0),
            corner(-1.0, -1.0, 1.0),
            corner(1.0, -1.0, 1.0),
            corner(1.0, 1.0, 1.0),
            corner(-1.0, 1.0, 1.0),
        ];
        let quads: [[u32; 4]; 6] = [
            [0, 3, 2, 1], // -z
            [4, 5, 6, 7], // +z
            [0, 1, 5, 4], // -y
            [2, 3, 7, 6], // +y
            [0, 4, 7, 3], // -x
            [1, 2, 6, 5], // +x
        ];
        let mut triangles = Vec::with_capacity(12);
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        TriangleMesh::new(v.to_vec(), triangles).expect("box mesh")
    }

    /// Icosphere by repeated subdivision of an icosahedron; `level` 5 gives
    /// 20480 faces. Outward windings.
    pub fn icosphere(center: Point3<f64>, radius: f64, level: u32) -> TriangleMesh {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let base = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ];
        let mut vertices: Vec<Vector3<f64>> = base
            .iter()
            .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
            .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let mut mid = |i: u32, j: u32, vertices: &mut Vec<Vector3<f64>>| -> u32 {
                    let key = (i.min(j), i.max(j));
                    *midpoint.entry(key).or_insert_with(|| {
                        let m = (vertices[i as usize] + vertices[j as usize]).normalize();
                        vertices.push(m);
                        (vertices.len() - 1) as u32
                    })
                };
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let vertices = vertices.into_iter().map(|v| center + v * radius).collect();
        TriangleMesh::new(vertices, faces).expect("icosphere mesh")
    }

    /// Axis-scaled icosphere: unit sphere stretched to the given semi-axes.
    pub fn ellipsoid(center: Point3<f64>, semi_axes: Vector3<f64>, level: u32) -> TriangleMesh {
        let mut mesh = icosphere(Point3::origin(), 1.0, level);
        for v in &mut mesh.vertices {
            v.x *= semi_axes.x;
            v.y *= semi_axes.y;
            v.z *= semi_axes.z;
            *v += center.coords;
        }
        mesh
    }

    /// Box whose top rear edge is cut by a slanted face (angle from
    /// horizontal, radians), a bluff-body silhouette. Watertight with
    /// outward windings; the slant runs over the rear 40% of the length and
    /// its drop is clamped above the floor.
    pub fn box_with_slant(
        center: Point3<f64>,
        half_extents: Vector3<f64>,
        slant_angle: f64,
    ) -> TriangleMesh {
        let h = half_extents;
        let run = 0.8 * h.x;
        let drop = (run * slant_angle.tan()).clamp(0.0, 1.6 * h.z);
        let x0 = h.x - run; // where the slant leaves the top face
        let z_rear = h.z - drop; // rear top edge height after the cut
        let c = |x: f64, y: f64, z: f64| Point3::new(center.x + x, center.y + y, center.z + z);
        let v = vec![
            c(-h.x, -h.y, -h.z),  // 0 bottom ring
            c(h.x, -h.y, -h.z),   // 1
            c(h.x, h.y, -h.z),    // 2
            c(-h.x, h.y, -h.z),   // 3
            c(-h.x, -h.y, h.z),   // 4 top front
            c(x0, -h.y, h.z),     // 5 slant start
            c(x0, h.y, h.z),      // 6
            c(-h.x, h.y, h.z),    // 7
            c(h.x, -h.y, z_rear), // 8 rear top after cut
            c(h.x, h.y, z_rear),  // 9
        ];
        let quads: [[u32; 4]; 5] = [
            [0, 3, 2, 1], // bottom, -z
            [4, 5, 6, 7], // top front part, +z
            [5, 8, 9, 6], // slant face
            [1, 2, 9, 8], // rear, +x
            [0, 4, 7, 3], // front, -x
        ];
        let mut triangles = Vec::new();
        for q in quads {
            triangles.push([q[0], q[1], q[2]]);
            triangles.push([q[0], q[2], q[3]]);
        }
        // Side pentagons: 0-1-8-5-4 (-y) and 3-7-6-9-2 (+y).
        triangles.extend_from_slice(&[[0, 1, 8], [0, 8, 5], [0, 5, 4]]);
        triangles.extend_from_slice(&[[3, 7, 6], [3, 6, 9], [3, 9, 2]]);
        TriangleMesh::new(v, triangles).expect("slanted box mesh")
    }

    /// Flat rectangular plate spanned by `u` and `v`, two triangles with
    /// normal `u x v` (normalized).
    pub fn plate(center: Point3<f64>, u: Vector3<f64>, v: Vector3<f64>) -> TriangleMesh {
        let p0 = center - u / 2.0 - v / 2.0;
        let p1 = center + u / 2.0 - v / 2.0;
        let p2 = center + u / 2.0 + v / 2.0;
        let p3 = center - u / 2.0 + v / 2.0;
        TriangleMesh::new(vec![p0, p1, p2, p3], vec![[0, 1, 2], [0, 2, 3]]).expect("plate mesh")
    }
}

#[cfg(test)]
mod tests {
    use super::primitives::*;
    use super::*;

    #[test]
    fn box_mesh_is_unit_cube() {
        let m = box_mesh(Point3::new(0.5, 0.5, 0.5), Vector3::new(0.5, 0.5, 0.5));
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.triangles.len(), 12);
        assert!((m.surface_area() - 6.0).abs() < 1e-12);
        for t in 0..12 {
            let n = m.face_normal(t);
            let [a, b, c] = m.triangle_vertices(t);
            let centroid = Point3::from((a.coords + b.coords + c.coords) / 3.0);
            assert!(
                n.dot(&(centroid - Point3::new(0.5, 0.5, 0.5))) > 0.0,
                "inward normal on face {t}"
            );
        }
    }

    #[test]
    fn icosphere_face_count_and_radius() {
        let m = icosphere(Point3::origin(), 2.0, 3);
        assert_eq!(m.triangles.len(), 20 * 4usize.pow(3));
        for v in &m.vertices {
            assert!((v.coords.norm() - 2.0).abs() < 1e-12);
        }
    }

    fn signed_volume(m: &TriangleMesh) -> f64 {
        (0..m.triangles.len())
            .map(|t| {
                let [a, b, c] = m.triangle_vertices(t);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    #[test]
    fn slanted_box_is_closed_and_outward() {
        let m = box_with_slant(Point3::origin(), Vector3::new(1.0, 0.5, 0.4), 0.4);
        // Closed orientable surface: each undirected edge appears twice
        // with opposite directions.
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for t in &m.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                *edges.entry(key).or_insert(0) += if e.0 < e.1 { 1 } else { -1 };
            }
        }
        for (edge, balance) in edges {
            assert_eq!(balance, 0, "unbalanced edge {edge:?}");
        }
        assert!(signed_volume(&m) > 0.0);
        // The cut removes volume from the full box.
        assert!(signed_volume(&m) < 2.0 * 1.0 * 0.8);
    }

    #[test]
    fn stl_binary_round_trip_unit_cube() {
        let m = box_mesh(Point3::new(0.5, 0.5, 0.5), Vector3::new(0.5, 0.5, 0.5));
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&(m.triangles.len() as u32).to_le_bytes());
        for t in 0..m.triangles.len() {
            let n = m.face_normal(t);
            for c in [n.x, n.y, n.z] {
                bytes.extend_from_slice(&(c as f32).to_le_bytes());
            }
            for p in m.triangle_vertices(t) {
                for c in [p.x, p.y, p.z] {
                    bytes.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
            bytes.extend_from_slice(&0u16.to_le_bytes());
        }
        let (parsed, report) = parse_mesh(&bytes, MeshFormat::StlBinary).unwrap();
        assert_eq!(parsed.vertices.len(), 8);
        assert_eq!(parsed.triangles.len(), 12);
        assert_eq!(report.degenerate_dropped, 0);
        // 12 triangles x 3 corners collapse onto 8 unique vertices.
        assert_eq!(report.duplicates_merged, 36 - 8);

        // Truncate one triangle record.
        bytes.truncate(bytes.len() - 50);
        match parse_mesh(&bytes, MeshFormat::StlBinary) {
            Err(MeshError::TruncatedStl { expected, actual }) => {
                assert_eq!(expected, 12);
                assert_eq!(actual, 11);
            }
            other => panic!("expected TruncatedStl, got {other:?}"),
        }
    }

    #[test]
    fn stl_ascii_parses_and_reports_offsets() {
        let text = "solid demo\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n  endloop\n endfacet\nendsolid demo\n";
        let (mesh, _) = parse_mesh(text.as_bytes(), MeshFormat::StlAscii).unwrap();
        assert_eq!(mesh.triangles.len(), 1);

        let bad = "solid demo\n facet normal 0 0 1\n  outer loop\n   vertex 0 zero 0\n";
        match parse_mesh(bad.as_bytes(), MeshFormat::StlAscii) {
            Err(MeshError::Parse { offset, .. }) => {
                assert_eq!(
                    offset,
                    "solid demo\n facet normal 0 0 1\n  outer loop\n".len()
                );
            }
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn obj_drops_zero_area_triangle_with_count() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n";
        let (mesh, report) = parse_mesh(text.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.triangles.len(), 1);
        assert_eq!(report.degenerate_dropped, 1);
    }

    #[test]
    fn obj_quad_fan_triangulation_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n";
        let (mesh, _) = parse_mesh(text.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        assert_eq!(mesh.vertices.len(), 4);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let text = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"; // collinear
        assert!(matches!(
            parse_mesh(text.as_bytes(), MeshFormat::Obj),
            Err(MeshError::Empty)
        ));
    }

    #[test]
    fn detect_format_sniffs_ascii_stl() {
        let ascii = b"solid x\n facet normal 0 0 1\n";
        assert_eq!(
            detect_format(Path::new("a.stl"), ascii),
            MeshFormat::StlAscii
        );
        let binary = [0u8; 100];
        assert_eq!(
            detect_format(Path::new("a.stl"), &binary),
            MeshFormat::StlBinary
        );
        assert_eq!(detect_format(Path::new("a.obj"), b""), MeshFormat::Obj);
    }

    #[test]
    fn dedup_merges_vertices_within_tolerance() {
        let soup = vec![
            [
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            [
                Point3::new(1e-10, 0.0, 0.0), // merges with vertex 0
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
        ];
        let (mesh, _) = index_soup(&soup).unwrap();
        assert_eq!(mesh.vertices.len(), 4);
    }
}
