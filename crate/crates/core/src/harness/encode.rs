//! Simulation-parameter encoding: per-dimension z-normalization followed by
//! projection onto the leading principal components of the training-split
//! covariance. Zero-variance dimensions are dropped with a warning; the
//! component sign is fixed so each component's largest-magnitude loading is
//! positive.

use nalgebra::{DMatrix, DVector};

use super::HarnessError;

#[derive(Debug, Clone)]
pub struct SimParamEncoder {
    /// Indices of the input dimensions that survived the variance check.
    kept: Vec<usize>,
    means: Vec<f64>,
    stds: Vec<f64>,
    /// `k x kept.len()` projection matrix, rows ordered by descending
    /// eigenvalue.
    components: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

impl SimParamEncoder {
    /// Fit statistics and components on the training split only.
    pub fn fit(train: &[Vec<f64>], k: usize) -> Result<Self, HarnessError> {
        if train.len() < 2 {
            return Err(HarnessError::TooFewVectors(train.len()));
        }
        let dim = train[0].len();
        for v in train {
            if v.len() != dim {
                return Err(HarnessError::DimensionMismatch(dim, v.len()));
            }
        }
        let n = train.len() as f64;
        let means: Vec<f64> = (0..dim)
            .map(|d| train.iter().map(|v| v[d]).sum::<f64>() / n)
            .collect();
        let vars: Vec<f64> = (0..dim)
            .map(|d| {
                train
                    .iter()
                    .map(|v| (v[d] - means[d]).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            })
            .collect();
        let kept: Vec<usize> = (0..dim).filter(|&d| vars[d] > 0.0).collect();
        if kept.len() < dim {
            log::warn!(
                "dropping {} zero-variance simulation-parameter dimension(s)",
                dim - kept.len()
            );
        }
        let means_kept: Vec<f64> = kept.iter().map(|&d| means[d]).collect();
        let stds_kept: Vec<f64> = kept.iter().map(|&d| vars[d].sqrt()).collect();

        // Covariance of the z-normalized data (the correlation matrix of
        // the kept dimensions).
        let m = kept.len();
        let mut cov = DMatrix::zeros(m, m);
        for v in train {
            let z = DVector::from_iterator(
                m,
                kept.iter()
                    .enumerate()
                    .map(|(c, &d)| (v[d] - means_kept[c]) / stds_kept[c]),
            );
            cov += &z * z.transpose();
        }
        cov /= n - 1.0;

        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let rank = eigenvalues
            .iter()
            .filter(|&&v| v > RANK_TOL * eigenvalues[0].max(RANK_TOL))
            .count();
        if k > rank {
            return Err(HarnessError::RankTooLow { k, rank });
        }

        let mut components = DMatrix::zeros(k, m);
        for (row, &i) in order.iter().take(k).enumerate() {
            let mut col = eig.eigenvectors.column(i).clone_owned();
            // Sign convention: the largest-magnitude loading is positive.
            let mut max_abs = 0.0;
            let mut max_val = 0.0;
            for &v in col.iter() {
                if v.abs() > max_abs {
                    max_abs = v.abs();
                    max_val = v;
                }
            }
            if max_val < 0.0 {
                col.neg_mut();
            }
            components.set_row(row, &col.transpose());
        }
        Ok(Self {
            kept,
            means: means_kept,
            stds: stds_kept,
            components,
            eigenvalues,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    /// Eigenvalues of the correlation matrix, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fraction of total variance captured by the projected components.
    pub fn explained_variance_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        let kept: f64 = self.eigenvalues[..self.output_dim()].iter().sum();
        kept / total
    }

    /// Z-normalize with the fitted statistics, then project.
    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>, HarnessError> {
        if v.len() < self.kept.iter().copied().max().map_or(0, |m| m + 1) {
            return Err(HarnessError::DimensionMismatch(
                self.kept.len(),
                v.len(),
            ));
        }
        let z = DVector::from_iterator(
            self.kept.len(),
            self.kept
                .iter()
                .enumerate()
                .map(|(c, &d)| (v[d] - self.means[c]) / self.stds[c]),
        );
        Ok((&self.components * z).iter().copied().collect())
    }

    /// Reconstruct the z-normalized vector from its projection (exact when
    /// `k` equals the full rank).
    pub fn inverse_transform_znormed(&self, coords: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coords);
        (self.components.transpose() * c).iter().copied().collect()
    }
}
