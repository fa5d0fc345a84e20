//! Kendall's tau-b rank correlation.
//!
//! Two routes compute the same counts: a quadratic pair scan and a
//! merge-counting path that sorts once and counts discordant pairs as
//! inversions. Both feed one shared formula, so their outputs are
//! bit-identical, and the tests hold them to that.

use crate::{Error, Result};

fn validate(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "rank vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "kendall_tau needs at least 2 items, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite rank value".into()));
    }
    Ok(())
}

/// tau-b = (C - D) / sqrt((P - T_a)(P - T_b)). A fully tied input makes a
/// zero denominator; that is reported as degenerate, not NaN.
fn tau_from_counts(c_minus_d: i64, p: u64, t_a: u64, t_b: u64) -> Result<f64> {
    let da = (p - t_a) as f64;
    let db = (p - t_b) as f64;
    if da == 0.0 || db == 0.0 {
        return Err(Error::Degenerate(
            "a fully tied vector leaves tau-b undefined (zero denominator)".into(),
        ));
    }
    Ok(c_minus_d as f64 / (da * db).sqrt())
}

/// Quadratic reference: enumerates every pair.
pub fn kendall_tau_brute(a: &[f64], b: &[f64]) -> Result<f64> {
    validate(a, b)?;
    let n = a.len();
    let mut concordant = 0u64;
    let mut discordant = 0u64;
    let mut t_a = 0u64;
    let mut t_b = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] == a[j];
            let db = b[i] == b[j];
            if da {
                t_a += 1;
            }
            if db {
                t_b += 1;
            }
            if da || db {
                continue;
            }
            if ((a[i] < a[j]) && (b[i] < b[j])) || ((a[i] > a[j]) && (b[i] > b[j])) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let p = n as u64 * (n as u64 - 1) / 2;
    tau_from_counts(concordant as i64 - discordant as i64, p, t_a, t_b)
}

/// Counts strict inversions (i < j with values[i] > values[j]) by merge
/// sort.
fn count_inversions(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inversions = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            // left[i..] are all greater than right[j].
            inversions += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    values.copy_from_slice(&merged);
    inversions
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge-counting tau-b: O(n log n), exact.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    validate(a, b)?;
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i].partial_cmp(&a[j])
            .expect("validated finite")
            .then(b[i].partial_cmp(&b[j]).expect("validated finite"))
    });

    // Tie counts: runs of equal a, and of equal (a, b), in the sorted order.
    let mut t_a = 0u64;
    let mut t_ab = 0u64;
    let mut run_a = 1u64;
    let mut run_ab = 1u64;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        if a[i] == a[j] {
            run_a += 1;
            if b[i] == b[j] {
                run_ab += 1;
            } else {
                t_ab += run_ab * (run_ab - 1) / 2;
                run_ab = 1;
            }
        } else {
            t_a += run_a * (run_a - 1) / 2;
            run_a = 1;
            t_ab += run_ab * (run_ab - 1) / 2;
            run_ab = 1;
        }
    }
    t_a += run_a * (run_a - 1) / 2;
    t_ab += run_ab * (run_ab - 1) / 2;

    let mut b_sorted: Vec<f64> = b.to_vec();
    b_sorted.sort_by(|x, y| x.partial_cmp(y).expect("validated finite"));
    let t_b = tied_pairs(&b_sorted);

    let mut seq: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let swaps = count_inversions(&mut seq);

    // Signed arithmetic: with heavy ties t_a + t_b can exceed p + t_ab.
    let p = n as u64 * (n as u64 - 1) / 2;
    let c_minus_d = p as i64 - t_a as i64 - t_b as i64 + t_ab as i64 - 2 * swaps as i64;
    tau_from_counts(c_minus_d, p, t_a, t_b)
}
