//! Quantile stratification and proportional subsampling.

use crate::{Error, Result};
use rand::Rng;

/// Assigns each value to one of `n_bins` equal-mass quantile bins.
///
/// Positions in a stable sort of `y` are chunked into `n_bins` contiguous
/// runs whose sizes differ by at most one (larger runs first). Equal values
/// all take the bin of their leftmost sorted occurrence, so the label is a
/// pure function of the value; heavily tied inputs therefore collapse into
/// fewer non-empty bins, the all-equal extreme into bin 0 alone.
pub fn stratify_bins(y: &[f64], n_bins: usize) -> Result<Vec<usize>> {
    if y.is_empty() {
        return Err(Error::InvalidInput(
            "stratify_bins needs at least one value".into(),
        ));
    }
    if n_bins == 0 {
        return Err(Error::InvalidInput("n_bins must be positive".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite accuracy value".into()));
    }
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        y[i].partial_cmp(&y[j])
            .expect("validated finite")
            .then(i.cmp(&j))
    });

    let base = n / n_bins;
    let extra = n % n_bins;
    let mut chunk_of_position = Vec::with_capacity(n);
    for bin in 0..n_bins {
        let size = base + usize::from(bin < extra);
        chunk_of_position.extend(std::iter::repeat_n(bin, size));
    }

    let mut labels = vec![0usize; n];
    let mut previous: Option<(f64, usize)> = None;
    for (position, &index) in order.iter().enumerate() {
        let bin = match previous {
            Some((value, bin)) if value == y[index] => bin,
            _ => chunk_of_position[position],
        };
        labels[index] = bin;
        previous = Some((y[index], bin));
    }
    Ok(labels)
}

/// Draws `n` distinct indices, allocated across bins proportionally to bin
/// mass with largest-remainder rounding (remainders tied toward lower bin
/// indices), sampled without replacement within each bin. The result is
/// sorted ascending.
pub fn stratified_sample<R: Rng + ?Sized>(
    bins: &[usize],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let pool = bins.len();
    if n > pool {
        return Err(Error::InvalidInput(format!(
            "cannot sample {n} items from a pool of {pool}"
        )));
    }
    if pool == 0 {
        return Ok(Vec::new());
    }
    let n_bins = bins.iter().max().expect("non-empty") + 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (index, &bin) in bins.iter().enumerate() {
        members[bin].push(index);
    }

    // Largest-remainder allocation of n across bins.
    let mut allocation = vec![0usize; n_bins];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(n_bins);
    let mut assigned = 0usize;
    for (bin, group) in members.iter().enumerate() {
        let quota = n as f64 * group.len() as f64 / pool as f64;
        let floor = quota.floor() as usize;
        allocation[bin] = floor;
        assigned += floor;
        remainders.push((bin, quota - floor as f64));
    }
    remainders.sort_by(|x, y| {
        y.1.partial_cmp(&x.1)
            .expect("finite quota")
            .then(x.0.cmp(&y.0))
    });
    for &(bin, _) in remainders.iter().take(n - assigned) {
        allocation[bin] += 1;
    }

    let mut chosen = Vec::with_capacity(n);
    for (bin, group) in members.iter().enumerate() {
        debug_assert!(
            allocation[bin] <= group.len(),
            "allocation exceeds bin size"
        );
        let mut candidates = group.clone();
        crate::rng::shuffle(&mut candidates, rng);
        chosen.extend(candidates.into_iter().take(allocation[bin]));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use std::collections::HashSet;

    #[test]
    fn ten_distinct_values_fill_bins_of_two() {
        let y: Vec<f64> = (0..10).map(|v| v as f64 * 3.5).collect();
        let labels = stratify_bins(&y, 5).unwrap();
        for bin in 0..5 {
            assert_eq!(labels.iter().filter(|&&b| b == bin).count(), 2, "bin {bin}");
        }
        // Sorted order maps to non-decreasing bins.
        assert_eq!(labels, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn all_equal_values_collapse_into_bin_zero() {
        let labels = stratify_bins(&[7.0; 9], 5).unwrap();
        assert!(labels.iter().all(|&b| b == 0));
    }

    #[test]
    fn uniform_grid_splits_at_multiples_of_twenty() {
        let y: Vec<f64> = (0..100).map(|v| v as f64).collect();
        let labels = stratify_bins(&y, 5).unwrap();
        for (value, &label) in labels.iter().enumerate() {
            assert_eq!(label, value / 20, "value {value}");
        }
    }

    #[test]
    fn tied_values_share_a_bin_and_input_order_is_irrelevant() {
        let y = [5.0, 1.0, 5.0, 3.0, 5.0, 2.0];
        let labels = stratify_bins(&y, 3).unwrap();
        assert_eq!((labels[0], labels[2]), (labels[4], labels[4]));
        let mut reversed = y;
        reversed.reverse();
        let mut relabeled = stratify_bins(&reversed, 3).unwrap();
        relabeled.reverse();
        assert_eq!(labels, relabeled);
    }

    #[test]
    fn chunk_sizes_differ_by_at_most_one_on_distinct_values() {
        let mut rng = seeded_rng(3, "stratify-sizes");
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.gen_range(5..200);
            // Distinct values: a shuffled integer range.
            let mut values: Vec<f64> = (0..n).map(|v| v as f64).collect();
            crate::rng::shuffle(&mut values, &mut rng);
            let labels = stratify_bins(&values, 5).unwrap();
            let mut counts = [0usize; 5];
            for &b in &labels {
                counts[b] += 1;
            }
            let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(max - min <= 1, "{counts:?}");
        }
    }

    #[test]
    fn sampling_the_whole_pool_returns_it() {
        let bins = stratify_bins(&(0..12).map(|v| v as f64).collect::<Vec<_>>(), 5).unwrap();
        let mut rng = seeded_rng(5, "sample-all");
        let sample = stratified_sample(&bins, 12, &mut rng).unwrap();
        assert_eq!(sample, (0..12).collect::<Vec<_>>());
        assert!(stratified_sample(&bins, 13, &mut rng).is_err());
    }

    #[test]
    fn fourteen_over_five_equal_bins_allocates_3_3_3_3_2() {
        let y: Vec<f64> = (0..50).map(|v| v as f64).collect();
        let bins = stratify_bins(&y, 5).unwrap();
        let mut rng = seeded_rng(7, "sample-14");
        let sample = stratified_sample(&bins, 14, &mut rng).unwrap();
        assert_eq!(sample.len(), 14);
        let mut counts = [0usize; 5];
        for &i in &sample {
            counts[bins[i]] += 1;
        }
        assert_eq!(counts, [3, 3, 3, 3, 2]);
    }

    #[test]
    fn allocations_stay_within_one_of_proportional() {
        let mut rng = seeded_rng(11, "sample-prop");
        use rand::Rng;
        for &n in &[14usize, 55, 220, 879, 3516] {
            let pool = n.max(4000) + rng.gen_range(0..500);
            let y: Vec<f64> = (0..pool).map(|_| rng.gen::<f64>().powi(3) * 90.0).collect();
            let bins = stratify_bins(&y, 5).unwrap();
            let sample = stratified_sample(&bins, n, &mut rng).unwrap();
            assert_eq!(sample.len(), n);
            let unique: HashSet<usize> = sample.iter().copied().collect();
            assert_eq!(unique.len(), n, "sampling must be without replacement");
            let mut bin_sizes = [0usize; 5];
            let mut counts = [0usize; 5];
            for &b in &bins {
                bin_sizes[b] += 1;
            }
            for &i in &sample {
                counts[bins[i]] += 1;
            }
            for bin in 0..5 {
                let exact = n as f64 * bin_sizes[bin] as f64 / pool as f64;
                assert!(
                    (counts[bin] as f64 - exact).abs() <= 1.0,
                    "budget {n} bin {bin}: {} vs {exact}",
                    counts[bin]
                );
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_rng_seed() {
        let y: Vec<f64> = (0..200).map(|v| (v % 37) as f64).collect();
        let bins = stratify_bins(&y, 5).unwrap();
        let a = stratified_sample(&bins, 55, &mut seeded_rng(13, "sample-det")).unwrap();
        let b = stratified_sample(&bins, 55, &mut seeded_rng(13, "sample-det")).unwrap();
        let c = stratified_sample(&bins, 55, &mut seeded_rng(14, "sample-det")).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
