//! Shared numeric primitives: standard-normal CDF, deterministic
//! reductions, and seed derivation.

/// Standard normal cumulative distribution function.
///
/// `Phi(x) = (1 + erf(x / sqrt(2))) / 2`, evaluated with a double-precision
/// error function (no lookup tables).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Pairwise (cascade) summation.
///
/// Deterministic for a given slice regardless of thread count, and with
/// O(log n) error growth instead of O(n) for naive accumulation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 128;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Arithmetic mean via pairwise summation. Returns 0 for an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Derive a per-module seed from the global seed.
///
/// `derived = splitmix64(global ^ fnv1a64(label))`. Every subcommand draws
/// its randomness from a stream seeded this way, so rerunning one stage in
/// isolation reproduces the pipeline's results for that stage.
pub fn derive_seed(global: u64, label: &str) -> u64 {
    splitmix64(global ^ fnv1a64(label.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        // Phi(1) and Phi(-1), 15 digits from the erf identity.
        assert!((normal_cdf(1.0) - 0.841344746068543).abs() < 1e-14);
        assert!((normal_cdf(-1.0) - 0.158655253931457).abs() < 1e-14);
        assert!((normal_cdf(-3.0) - 0.001349898031630).abs() < 1e-14);
    }

    #[test]
    fn normal_cdf_symmetry() {
        for i in 0..200 {
            let x = -5.0 + 0.05 * i as f64;
            assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pairwise_sum_matches_exact_on_integers() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), (10_000.0 * 9_999.0) / 2.0);
    }

    #[test]
    fn pairwise_mean_empty_is_zero() {
        assert_eq!(pairwise_mean(&[]), 0.0);
    }

    #[test]
    fn derive_seed_separates_labels() {
        let a = derive_seed(42, "schedule");
        let b = derive_seed(42, "sdf");
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(42, "schedule"));
    }
}
