//! Stratified splitting on a scalar target: rank-based quantile bins, each
//! split per the requested fractions with largest-remainder rounding.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;

/// Partition `targets` indices into `fractions.len()` splits.
///
/// Targets are quantile-binned by rank into `bins` bins; each bin is
/// shuffled deterministically and divided per `fractions`, so per-bin
/// counts differ from the exact proportion by less than one sample. Bins
/// smaller than the partition count are merged into their neighbor (with a
/// warning) before splitting.
pub fn stratified_split(
    targets: &[f64],
    fractions: &[f64],
    bins: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, HarnessError> {
    if bins == 0 {
        return Err(HarnessError::NoBins);
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 || fractions.iter().any(|&f| f < 0.0) {
        return Err(HarnessError::BadFractions(total));
    }
    let n = targets.len();
    let parts = fractions.len();
    if n == 0 {
        return Err(HarnessError::DatasetTooSmall { min: 1, got: 0 });
    }

    // Rank order (stable on ties via the index).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)));

    // Equal-count quantile bins.
    let bins = bins.min(n);
    let mut bin_ranges: Vec<(usize, usize)> = (0..bins)
        .map(|b| (b * n / bins, (b + 1) * n / bins))
        .filter(|(s, e)| e > s)
        .collect();
    // Merge bins smaller than the partition count into a neighbor.
    let mut merged = 0usize;
    let mut i = 0;
    while i < bin_ranges.len() {
        let size = bin_ranges[i].1 - bin_ranges[i].0;
        if size < parts && bin_ranges.len() > 1 {
            let (s, e) = bin_ranges.remove(i);
            if i < bin_ranges.len() {
                bin_ranges[i].0 = s; // absorb into the right neighbor
            } else {
                bin_ranges[i - 1].1 = e; // last bin: absorb leftward
            }
            merged += 1;
        } else {
            i += 1;
        }
    }
    if merged > 0 {
        log::warn!("merged {merged} quantile bin(s) smaller than the partition count");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partitions: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for &(start, end) in &bin_ranges {
        let mut members: Vec<usize> = order[start..end].to_vec();
        // Fisher-Yates with the shared stream.
        for i in (1..members.len()).rev() {
            let j = rng.gen_range(0..=i);
            members.swap(i, j);
        }
        // Largest-remainder allocation of the bin across partitions.
        let m = members.len();
        let exact: Vec<f64> = fractions.iter().map(|f| f * m as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut leftover = m - counts.iter().sum::<usize>();
        let mut by_remainder: Vec<usize> = (0..parts).collect();
        by_remainder.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        for &p in &by_remainder {
            if leftover == 0 {
                break;
            }
            counts[p] += 1;
            leftover -= 1;
        }
        let mut cursor = 0;
        for (p, &c) in counts.iter().enumerate() {
            partitions[p].extend_from_slice(&members[cursor..cursor + c]);
            cursor += c;
        }
    }
    for p in &mut partitions {
        p.sort_unstable();
    }
    Ok(partitions)
}
