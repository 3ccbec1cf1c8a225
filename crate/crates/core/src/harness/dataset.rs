//! Synthetic dataset generation and the pooled SDF feature extractor.
//!
//! Features are block means of the signed distance field over a fixed
//! pyramid of ROI subdivisions (1, 2x2x2, 4x4x4 blocks: 73 values), so the
//! feature dimension is identical at every input resolution and pooled
//! statistics converge as the grid refines.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::shapes::{analytic_sdf, ShapeFamily, ShapeSpec};
use super::HarnessError;
use crate::grid::{Resolution, Roi};

/// Pyramid of cubic block subdivisions used for pooling.
pub const POOL_LEVELS: [usize; 3] = [1, 2, 4];
/// Total pooled feature dimension: 1 + 8 + 64.
pub const FEATURE_DIM: usize = 73;

/// One synthetic sample: shape spec, analytic drag target, and pooled SDF
/// features per resolution level (grids themselves are rematerialized on
/// demand via [`super::sample_grids`]; holding dense R512 grids for a whole
/// dataset would not fit in memory).
#[derive(Debug, Clone)]
pub struct ToySample {
    pub spec: ShapeSpec,
    pub target_cd: f64,
    /// Indexed by resolution level (0 = R128, 1 = R256, 2 = R512).
    pub features: [Vec<f64>; 3],
}

/// Pooled block means of the SDF evaluated on the cell-center lattice of
/// `shape`, streamed without materializing the grid.
pub fn pooled_features(spec: &ShapeSpec, roi: &Roi, shape: [usize; 3]) -> Vec<f64> {
    let [nx, ny, nz] = shape;
    // Accumulate into the finest level (4x4x4); coarser levels aggregate
    // from it, which is exact because every level divides the next.
    const L: usize = 4;
    let mut sums = [[0.0f64; L]; L * L]; // [bi*L+bj][bk]
    let mut counts = [[0usize; L]; L * L];
    for i in 0..nx {
        let bi = i * L / nx;
        for j in 0..ny {
            let bj = j * L / ny;
            let row = bi * L + bj;
            for k in 0..nz {
                let bk = k * L / nz;
                let p = roi.cell_center(shape, i, j, k);
                sums[row][bk] += analytic_sdf(spec, roi, &p);
                counts[row][bk] += 1;
            }
        }
    }
    let mut features = Vec::with_capacity(FEATURE_DIM);
    // Level 1: global mean.
    let total: f64 = sums.iter().flatten().sum();
    let n_total: usize = counts.iter().flatten().sum();
    features.push(total / n_total as f64);
    // Level 2: 2x2x2 block means, aggregated from the 4x4x4 sums.
    for bi in 0..2 {
        for bj in 0..2 {
            for bk in 0..2 {
                let mut s = 0.0;
                let mut c = 0usize;
                for di in 0..2 {
                    for dj in 0..2 {
                        for dk in 0..2 {
                            let row = (bi * 2 + di) * L + (bj * 2 + dj);
                            s += sums[row][bk * 2 + dk];
                            c += counts[row][bk * 2 + dk];
                        }
                    }
                }
                features.push(s / c as f64);
            }
        }
    }
    // Level 4.
    for bi in 0..L {
        for bj in 0..L {
            for bk in 0..L {
                let row = bi * L + bj;
                features.push(sums[row][bk] / counts[row][bk] as f64);
            }
        }
    }
    features
}

fn draw_spec<R: Rng>(rng: &mut R) -> ShapeSpec {
    let family = match rng.gen_range(0..3u32) {
        0 => ShapeFamily::Box,
        1 => ShapeFamily::Ellipsoid,
        _ => ShapeFamily::BoxWithSlant,
    };
    let extents = [
        rng.gen_range(3.0..4.8),
        rng.gen_range(1.5..2.0),
        rng.gen_range(1.1..1.6),
    ];
    let slant_angle = rng.gen_range(0.1..0.6);
    let spoiler_height = rng.gen_range(0.0..0.25);
    let corner_radius = rng.gen_range(0.0..0.15);
    // Solver-setting stand-ins: discrete solver id, inlet speed, simulated
    // physical time, refinement level, turbulence intensity correlated
    // with the solver id.
    let solver = rng.gen_range(0..3u32) as f64;
    let inlet = rng.gen_range(27.0..38.0);
    let sim_time = rng.gen_range(2.0..6.0);
    let refine = rng.gen_range(1.0..3.0);
    let turb = 0.02 + 0.015 * solver + rng.gen_range(0.0..0.02);
    ShapeSpec {
        family,
        extents,
        slant_angle,
        spoiler_height,
        corner_radius,
        sim_params: vec![solver, inlet, sim_time, refine, turb],
    }
}

/// Generate `n` samples deterministically from a seed, precomputing pooled
/// features at all three resolutions.
pub fn generate_dataset(n: usize, seed: u64) -> Result<Vec<ToySample>, HarnessError> {
    if n < 1 {
        return Err(HarnessError::DatasetTooSmall { min: 1, got: n });
    }
    let roi = Roi::vehicle_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<ShapeSpec> = (0..n).map(|_| draw_spec(&mut rng)).collect();
    // Feature extraction parallelizes over samples; outputs are
    // position-indexed so the result is independent of thread count.
    let samples: Vec<ToySample> = specs
        .into_par_iter()
        .map(|spec| {
            let features = [
                pooled_features(&spec, &roi, Resolution::R128.shape()),
                pooled_features(&spec, &roi, Resolution::R256.shape()),
                pooled_features(&spec, &roi, Resolution::R512.shape()),
            ];
            let target_cd = spec.target_cd();
            ToySample {
                spec,
                target_cd,
                features,
            }
        })
        .collect();
    Ok(samples)
}
