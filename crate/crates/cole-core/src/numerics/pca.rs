//! Principal component analysis over embedding matrices.

use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A fitted projection onto the leading principal directions.
///
/// Component rows are orthonormal and ordered by descending explained
/// variance. The retained count is min(k_requested, N - 1, D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Column means of the training matrix.
    pub mean: Vec<f64>,
    /// k_eff rows of D loadings each.
    pub components: Vec<Vec<f64>>,
    /// Variance captured by each component: singular value squared over N - 1.
    pub explained_variance: Vec<f64>,
    /// The dimensionality the caller asked for before the min rule.
    pub k_requested: usize,
}

impl PcaModel {
    /// Number of retained components.
    pub fn k_eff(&self) -> usize {
        self.components.len()
    }

    /// Input dimensionality D.
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits a PCA model: centers X, takes the top right singular directions.
pub fn pca_fit(x: &[Vec<f64>], k_requested: usize) -> Result<PcaModel> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "pca_fit needs at least 2 rows, got {n}"
        )));
    }
    if k_requested == 0 {
        return Err(Error::InvalidInput("k_requested must be positive".into()));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::InvalidInput(
            "pca_fit needs at least 1 column".into(),
        ));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} columns but row 0 has {d}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "row {i} has a non-finite entry"
            )));
        }
    }

    let mut mean = vec![0.0; d];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
    if centered.iter().all(|v| v.abs() < 1e-12) {
        return Err(Error::Degenerate(
            "every column of X is constant; there is no variance to decompose".into(),
        ));
    }

    let mut svd = centered.svd(false, true);
    svd.sort_by_singular_values();
    let v_t = svd.v_t.expect("v_t requested");
    let k_eff = k_requested.min(n - 1).min(d);

    let components: Vec<Vec<f64>> = (0..k_eff)
        .map(|r| v_t.row(r).iter().copied().collect())
        .collect();
    let explained_variance: Vec<f64> = svd
        .singular_values
        .iter()
        .take(k_eff)
        .map(|s| s * s / (n as f64 - 1.0))
        .collect();

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        k_requested,
    })
}

/// Projects `x` onto the fitted components: components · (x - mean).
pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::InvalidInput(format!(
            "pca_transform expects dimension {}, got {}",
            model.input_dim(),
            x.len()
        )));
    }
    Ok(model
        .components
        .iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .zip(&model.mean)
                .map(|((c, v), m)| c * (v - m))
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_normal, seeded_rng};

    fn random_matrix(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeded_rng(seed, "pca-test");
        (0..n)
            .map(|_| (0..d).map(|_| sample_normal(&mut rng)).collect())
            .collect()
    }

    fn assert_orthonormal(model: &PcaModel) {
        for (i, a) in model.components.iter().enumerate() {
            for (j, b) in model.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-8, "rows {i},{j}: dot = {dot}");
            }
        }
    }

    /// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
    /// (eigenvalues, eigenvectors as rows), descending by eigenvalue.
    #[allow(clippy::needless_range_loop)] // indexed plane rotations read clearer than iterators
    fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v = vec![vec![0.0; n]; n];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _sweep in 0..200 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in &mut v {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
        let vectors: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| v.iter().map(|row| row[i]).collect())
            .collect();
        (values, vectors)
    }

    #[test]
    fn line_data_yields_a_parallel_first_component() {
        let direction = [0.6, 0.8];
        let data: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let t = i as f64 - 2.5;
                vec![1.0 + t * direction[0], -2.0 + t * direction[1]]
            })
            .collect();
        let model = pca_fit(&data, 128).unwrap();
        assert_eq!(model.k_eff(), 2);
        assert_orthonormal(&model);
        let dot: f64 = model.components[0]
            .iter()
            .zip(&direction)
            .map(|(c, d)| c * d)
            .sum();
        assert!(
            (dot.abs() - 1.0).abs() < 1e-10,
            "first component not parallel: dot = {dot}"
        );
        assert!(model.explained_variance[1].abs() < 1e-12);
    }

    #[test]
    fn matches_a_jacobi_covariance_oracle() {
        let (n, d) = (50, 10);
        let data = random_matrix(n, d, 31);
        let model = pca_fit(&data, d).unwrap();
        assert_orthonormal(&model);

        let mut mean = vec![0.0; d];
        for row in &data {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n as f64;
            }
        }
        let mut cov = vec![vec![0.0; d]; d];
        for row in &data {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]) / (n as f64 - 1.0);
                }
            }
        }
        let (values, vectors) = jacobi_eigen(cov);

        assert_eq!(model.k_eff(), d);
        for k in 0..d {
            assert!(
                (model.explained_variance[k] - values[k]).abs() < 1e-6,
                "variance {k}: {} vs {}",
                model.explained_variance[k],
                values[k]
            );
            // Directions agree up to sign.
            let dot: f64 = model.components[k]
                .iter()
                .zip(&vectors[k])
                .map(|(a, b)| a * b)
                .sum();
            assert!(
                (dot.abs() - 1.0).abs() < 1e-6,
                "component {k}: |dot| = {}",
                dot.abs()
            );
        }
    }

    #[test]
    fn k_eff_is_capped_by_sample_count() {
        let data = random_matrix(14, 4096, 7);
        let model = pca_fit(&data, 128).unwrap();
        assert_eq!(model.k_eff(), 13);
        assert_eq!(model.k_requested, 128);
        assert_orthonormal(&model);
    }

    #[test]
    fn transform_of_the_mean_is_zero() {
        let data = random_matrix(9, 5, 3);
        let model = pca_fit(&data, 5).unwrap();
        let projected = pca_transform(&model, &model.mean.clone()).unwrap();
        assert!(projected.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn score_variances_equal_explained_variance() {
        let data = random_matrix(20, 6, 13);
        let model = pca_fit(&data, 6).unwrap();
        let scores: Vec<Vec<f64>> = data
            .iter()
            .map(|row| pca_transform(&model, row).unwrap())
            .collect();
        for k in 0..model.k_eff() {
            let mean: f64 = scores.iter().map(|s| s[k]).sum::<f64>() / 20.0;
            let var: f64 = scores.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / 19.0;
            assert!(
                (var - model.explained_variance[k]).abs() < 1e-8,
                "component {k}: {var} vs {}",
                model.explained_variance[k]
            );
        }
    }

    #[test]
    fn projection_round_trips_in_span_data() {
        // Rank-3 data in 8 dimensions: the projection loses nothing.
        let mut rng = seeded_rng(5, "pca-span");
        let basis = random_matrix(3, 8, 19);
        let data: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                let coeffs: Vec<f64> = (0..3).map(|_| sample_normal(&mut rng)).collect();
                (0..8)
                    .map(|j| coeffs.iter().zip(&basis).map(|(c, b)| c * b[j]).sum())
                    .collect()
            })
            .collect();
        let model = pca_fit(&data, 3).unwrap();
        assert_eq!(model.k_eff(), 3);
        for row in &data {
            let scores = pca_transform(&model, row).unwrap();
            for j in 0..8 {
                let rebuilt: f64 = model.mean[j]
                    + model
                        .components
                        .iter()
                        .zip(&scores)
                        .map(|(c, s)| c[j] * s)
                        .sum::<f64>();
                assert!(
                    (rebuilt - row[j]).abs() < 1e-8,
                    "column {j}: {rebuilt} vs {}",
                    row[j]
                );
            }
        }
    }

    #[test]
    fn explained_variance_is_non_increasing() {
        for seed in [1u64, 2, 3] {
            let model = pca_fit(&random_matrix(25, 7, seed), 7).unwrap();
            for pair in model.explained_variance.windows(2) {
                assert!(pair[0] >= pair[1] - 1e-12);
            }
            assert_orthonormal(&model);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(pca_fit(&[vec![1.0, 2.0]], 4).is_err());
        let constant = vec![vec![3.0, -1.0]; 5];
        assert!(matches!(
            pca_fit(&constant, 4),
            Err(crate::Error::Degenerate(_))
        ));
        let model = pca_fit(&random_matrix(5, 4, 2), 4).unwrap();
        assert!(pca_transform(&model, &[0.0; 3]).is_err());
    }
}
