//! The MLP surrogate: a small feed-forward regressor trained with
//! adaptive-moment gradient descent on either loss.
//!
//! Training is deterministic per seed: initialization, epoch shuffles, and
//! dropout masks are all drawn from one seeded stream in a fixed order
//! (init layer by layer, then per epoch the shuffle, then per batch the
//! masks). Dropout is inverted and active only during training.

use crate::numerics::loss::{loss_and_gradient, LossKind};
use crate::numerics::pca::{pca_transform, PcaModel};
use crate::rng::{derive_seed, shuffle};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Network shape and regularization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Feature dimension entering the first layer.
    pub input_dim: usize,
    /// Units per hidden layer.
    pub hidden_width: usize,
    /// Number of hidden layers.
    pub hidden_layers: usize,
    /// LeakyReLU slope for negative inputs.
    pub negative_slope: f64,
    /// Dropout probability after each hidden activation.
    pub dropout_p: f64,
    /// Output width; only the scalar head is supported.
    pub output_dim: usize,
}

impl MlpConfig {
    /// Defaults: 3 hidden layers of 128, LeakyReLU(0.01), dropout 0.1.
    pub fn new(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden_width: 128,
            hidden_layers: 3,
            negative_slope: 0.01,
            dropout_p: 0.1,
            output_dim: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(Error::InvalidInput(
                "network dimensions must be positive".into(),
            ));
        }
        if self.output_dim != 1 {
            return Err(Error::InvalidInput(format!(
                "only a scalar output head is supported, got output_dim {}",
                self.output_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidInput(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !self.negative_slope.is_finite() || self.negative_slope < 0.0 {
            return Err(Error::InvalidInput(format!(
                "negative_slope must be finite and non-negative, got {}",
                self.negative_slope
            )));
        }
        Ok(())
    }
}

/// Optimizer and schedule settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Loss to minimize.
    pub loss: LossKind,
    /// Step size.
    pub learning_rate: f64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator stabilizer.
    pub adam_eps: f64,
    /// Passes over the training set.
    pub epochs: usize,
    /// Below this sample count, every epoch is one full-batch step.
    pub full_batch_limit: usize,
    /// Mini-batch size at or above the full-batch limit.
    pub batch_size: usize,
    /// Global gradient norm cap.
    pub clip_norm: f64,
    /// Seed for init, shuffles, and dropout.
    pub seed: u64,
}

impl TrainConfig {
    /// Defaults: rank loss, lr 1e-3, 200 epochs, full batch under 256
    /// samples else batches of 128, clip at norm 5.
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            loss: LossKind::pairwise_hinge(),
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 200,
            full_batch_limit: 256,
            batch_size: 128,
            clip_norm: 5.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.epochs == 0
            || self.batch_size < 2
            || self.clip_norm <= 0.0
        {
            return Err(Error::InvalidInput(
                "learning_rate, epochs, clip_norm must be positive and batch_size at least 2"
                    .into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidInput("adam betas must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// A trained surrogate. Immutable; safe to share across prediction calls.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    config: MlpConfig,
    /// Per layer, (fan_out, fan_in).
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    pca: Option<PcaModel>,
    seed: u64,
    final_loss: f64,
}

impl SurrogateModel {
    /// Network settings the model was trained with.
    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    /// Training seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Loss of the last optimizer step.
    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    /// The input projection, when one was attached.
    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    /// Deterministic forward pass with dropout disabled. Rows must match
    /// the PCA input dimension when a projection is attached, otherwise
    /// the network input dimension.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let x = self.project(rows)?;
        let out = forward_eval(&self.weights, &self.biases, self.config.negative_slope, &x);
        Ok(out.column(0).to_vec())
    }

    fn project(&self, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
        let expected = match &self.pca {
            Some(p) => p.input_dim(),
            None => self.config.input_dim,
        };
        let mut data = Vec::with_capacity(rows.len() * self.config.input_dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != expected {
                return Err(Error::InvalidInput(format!(
                    "row {i} has dimension {} but the model expects {expected}",
                    row.len()
                )));
            }
            match &self.pca {
                Some(p) => data.extend(pca_transform(p, row)?),
                None => data.extend_from_slice(row),
            }
        }
        Array2::from_shape_vec((rows.len(), self.config.input_dim), data)
            .map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

fn forward_eval(
    weights: &[Array2<f64>],
    biases: &[Array1<f64>],
    slope: f64,
    x: &Array2<f64>,
) -> Array2<f64> {
    let mut a = x.clone();
    let last = weights.len() - 1;
    for (l, (w, b)) in weights.iter().zip(biases).enumerate() {
        let mut z = a.dot(&w.t());
        z += b;
        if l < last {
            z.mapv_inplace(|v| leaky(v, slope));
        }
        a = z;
    }
    a
}

/// Trains a surrogate on `features` (or their projection when `pca` is
/// given; then `config.input_dim` must equal the projection's k_eff).
///
/// Mini-batches smaller than 2 are dropped, and a batch whose targets are
/// all tied contributes no step; training fails as degenerate only when no
/// step at all could be taken.
pub fn train_surrogate(
    features: &[Vec<f64>],
    targets: &[f64],
    config: &MlpConfig,
    train: &TrainConfig,
    pca: Option<PcaModel>,
) -> Result<SurrogateModel> {
    config.validate()?;
    train.validate()?;
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 2 samples, got {n}"
        )));
    }
    if targets.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} feature rows but {} targets",
            targets.len()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite target".into()));
    }
    if let Some(p) = &pca {
        if config.input_dim != p.k_eff() {
            return Err(Error::InvalidInput(format!(
                "config.input_dim {} does not match the projection's k_eff {}",
                config.input_dim,
                p.k_eff()
            )));
        }
    }

    let shell = SurrogateModel {
        config: config.clone(),
        weights: Vec::new(),
        biases: Vec::new(),
        pca,
        seed: train.seed,
        final_loss: f64::NAN,
    };
    let x = shell.project(features)?;

    let mut rng = ChaCha20Rng::from_seed(derive_seed(&[b"mlp-train", &train.seed.to_le_bytes()]));

    // Layer sizes: input -> hidden^layers -> 1.
    let mut sizes = vec![config.input_dim];
    sizes.extend(std::iter::repeat_n(
        config.hidden_width,
        config.hidden_layers,
    ));
    sizes.push(config.output_dim);

    let mut weights: Vec<Array2<f64>> = Vec::new();
    let mut biases: Vec<Array1<f64>> = Vec::new();
    for pair in sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w: Vec<f64> = (0..fan_out * fan_in)
            .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        weights.push(Array2::from_shape_vec((fan_out, fan_in), w).expect("shape matches"));
        let b: Vec<f64> = (0..fan_out)
            .map(|_| bound * (2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        biases.push(Array1::from_vec(b));
    }

    let mut m_w: Vec<Array2<f64>> = weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut v_w: Vec<Array2<f64>> = weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut m_b: Vec<Array1<f64>> = biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let mut v_b: Vec<Array1<f64>> = biases.iter().map(|b| Array1::zeros(b.len())).collect();
    let mut step = 0usize;

    let full_batch = n < train.full_batch_limit;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut final_loss = f64::NAN;
    let mut steps_taken = 0usize;

    for epoch in 0..train.epochs {
        if !full_batch {
            shuffle(&mut indices, &mut rng);
        }
        let batches: Vec<&[usize]> = if full_batch {
            vec![&indices[..]]
        } else {
            indices
                .chunks(train.batch_size)
                .filter(|c| c.len() >= 2)
                .collect()
        };
        for batch in batches {
            let b = batch.len();
            let xb = Array2::from_shape_fn((b, config.input_dim), |(i, j)| x[(batch[i], j)]);
            let yb: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();

            // Forward with caches. Masks already fold in the 1/(1-p) scale.
            let mut activations: Vec<Array2<f64>> = vec![xb];
            let mut pre_acts: Vec<Array2<f64>> = Vec::new();
            let mut masks: Vec<Option<Array2<f64>>> = Vec::new();
            for l in 0..config.hidden_layers {
                let mut z = activations[l].dot(&weights[l].t());
                z += &biases[l];
                let mut a = z.mapv(|v| leaky(v, config.negative_slope));
                let mask = if config.dropout_p > 0.0 {
                    let keep = 1.0 - config.dropout_p;
                    let data: Vec<f64> = (0..b * config.hidden_width)
                        .map(|_| {
                            if rng.gen::<f64>() < config.dropout_p {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        })
                        .collect();
                    let mask = Array2::from_shape_vec((b, config.hidden_width), data)
                        .expect("shape matches");
                    a *= &mask;
                    Some(mask)
                } else {
                    None
                };
                pre_acts.push(z);
                activations.push(a);
                masks.push(mask);
            }
            let last = config.hidden_layers;
            let mut z_out = activations[last].dot(&weights[last].t());
            z_out += &biases[last];
            let preds: Vec<f64> = z_out.column(0).to_vec();

            let (value, dpred) = match loss_and_gradient(train.loss, &preds, &yb) {
                Ok(pair) => pair,
                // A batch with fully tied targets constrains nothing.
                Err(Error::Degenerate(_)) => continue,
                Err(e) => return Err(e),
            };
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            final_loss = value;
            steps_taken += 1;

            // Backward.
            let mut g_w: Vec<Array2<f64>> =
                weights.iter().map(|w| Array2::zeros(w.dim())).collect();
            let mut g_b: Vec<Array1<f64>> = biases.iter().map(|b| Array1::zeros(b.len())).collect();
            let delta_out = Array2::from_shape_vec((b, 1), dpred).expect("shape matches");
            g_w[last] = delta_out.t().dot(&activations[last]);
            g_b[last] = delta_out.sum_axis(ndarray::Axis(0));
            let mut delta = delta_out.dot(&weights[last]);
            for l in (0..config.hidden_layers).rev() {
                let mut local = pre_acts[l].mapv(|v| leaky_grad(v, config.negative_slope));
                if let Some(mask) = &masks[l] {
                    local *= mask;
                }
                delta *= &local;
                g_w[l] = delta.t().dot(&activations[l]);
                g_b[l] = delta.sum_axis(ndarray::Axis(0));
                if l > 0 {
                    delta = delta.dot(&weights[l]);
                }
            }

            // Global norm clip.
            let mut sq = 0.0;
            for g in &g_w {
                sq += g.iter().map(|v| v * v).sum::<f64>();
            }
            for g in &g_b {
                sq += g.iter().map(|v| v * v).sum::<f64>();
            }
            let norm = sq.sqrt();
            if norm > train.clip_norm {
                let scale = train.clip_norm / norm;
                for g in &mut g_w {
                    g.mapv_inplace(|v| v * scale);
                }
                for g in &mut g_b {
                    g.mapv_inplace(|v| v * scale);
                }
            }

            // Adam update.
            step += 1;
            let bc1 = 1.0 - train.beta1.powi(step as i32);
            let bc2 = 1.0 - train.beta2.powi(step as i32);
            for l in 0..weights.len() {
                adam_tensor(
                    weights[l].as_slice_mut().expect("contiguous"),
                    g_w[l].as_slice().expect("contiguous"),
                    m_w[l].as_slice_mut().expect("contiguous"),
                    v_w[l].as_slice_mut().expect("contiguous"),
                    train,
                    bc1,
                    bc2,
                );
                adam_tensor(
                    biases[l].as_slice_mut().expect("contiguous"),
                    g_b[l].as_slice().expect("contiguous"),
                    m_b[l].as_slice_mut().expect("contiguous"),
                    v_b[l].as_slice_mut().expect("contiguous"),
                    train,
                    bc1,
                    bc2,
                );
            }
        }
    }

    if steps_taken == 0 {
        return Err(Error::Degenerate(
            "no optimizer step could be taken; targets are tied in every batch".into(),
        ));
    }
    if weights.iter().any(|w| w.iter().any(|v| !v.is_finite()))
        || biases.iter().any(|b| b.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFiniteLoss {
            epoch: train.epochs - 1,
        });
    }

    Ok(SurrogateModel {
        weights,
        biases,
        final_loss,
        ..shell
    })
}

fn adam_tensor(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    train: &TrainConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..param.len() {
        m[i] = train.beta1 * m[i] + (1.0 - train.beta1) * grad[i];
        v[i] = train.beta2 * v[i] + (1.0 - train.beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= train.learning_rate * m_hat / (v_hat.sqrt() + train.adam_eps);
    }
}

const FORMAT_TAG: &str = "cole-surrogate/1";

#[derive(Serialize, Deserialize)]
struct SerializedSurrogate {
    format: String,
    config: MlpConfig,
    seed: u64,
    final_loss: f64,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    pca: Option<PcaModel>,
}

/// Writes the model as a versioned JSON record.
pub fn save_surrogate(model: &SurrogateModel, path: &Path) -> Result<()> {
    let record = SerializedSurrogate {
        format: FORMAT_TAG.to_string(),
        config: model.config.clone(),
        seed: model.seed,
        final_loss: model.final_loss,
        weights: model
            .weights
            .iter()
            .map(|w| w.rows().into_iter().map(|r| r.to_vec()).collect())
            .collect(),
        biases: model.biases.iter().map(|b| b.to_vec()).collect(),
        pca: model.pca.clone(),
    };
    std::fs::write(path, serde_json::to_string(&record)?)?;
    Ok(())
}

/// Reads a model written by [`save_surrogate`]. Predictions round-trip
/// bit for bit because weights are stored as exact decimal floats.
pub fn load_surrogate(path: &Path) -> Result<SurrogateModel> {
    let record: SerializedSurrogate = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if record.format != FORMAT_TAG {
        return Err(Error::InvalidInput(format!(
            "unsupported surrogate format '{}', expected '{FORMAT_TAG}'",
            record.format
        )));
    }
    record.config.validate()?;
    let mut sizes = vec![record.config.input_dim];
    sizes.extend(std::iter::repeat_n(
        record.config.hidden_width,
        record.config.hidden_layers,
    ));
    sizes.push(record.config.output_dim);
    if record.weights.len() != sizes.len() - 1 || record.biases.len() != sizes.len() - 1 {
        return Err(Error::InvalidInput(
            "layer count does not match config".into(),
        ));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, pair) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let w = &record.weights[l];
        if w.len() != fan_out || w.iter().any(|row| row.len() != fan_in) {
            return Err(Error::InvalidInput(format!(
                "layer {l} weight shape does not match config"
            )));
        }
        if record.biases[l].len() != fan_out {
            return Err(Error::InvalidInput(format!(
                "layer {l} bias shape does not match config"
            )));
        }
        let flat: Vec<f64> = w.iter().flatten().copied().collect();
        weights.push(Array2::from_shape_vec((fan_out, fan_in), flat).expect("validated shape"));
        biases.push(Array1::from_vec(record.biases[l].clone()));
    }
    Ok(SurrogateModel {
        config: record.config,
        weights,
        biases,
        pca: record.pca,
        seed: record.seed,
        final_loss: record.final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::pca::pca_fit;
    use crate::rng::{sample_normal, seeded_rng};

    fn toy_ranking(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = seeded_rng(seed, "mlp-toy");
        let w: Vec<f64> = (0..d).map(|_| sample_normal(&mut rng)).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| sample_normal(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * 10.0 + 50.0)
            .collect();
        (x, y)
    }

    fn small_config(input_dim: usize) -> MlpConfig {
        MlpConfig {
            hidden_width: 32,
            ..MlpConfig::new(input_dim)
        }
    }

    #[test]
    fn learns_a_linear_ranking_toy() {
        let (x, y) = toy_ranking(64, 8, 11);
        let config = MlpConfig {
            dropout_p: 0.0,
            ..small_config(8)
        };
        let train = TrainConfig {
            epochs: 1000,
            ..TrainConfig::new(5)
        };
        let model = train_surrogate(&x, &y, &config, &train, None).unwrap();
        let preds = model.predict(&x).unwrap();
        let (loss, _) = crate::numerics::loss::pairwise_hinge_loss(&preds, &y, 0.1).unwrap();
        assert!(loss < 1e-3, "final training rank loss {loss}");
    }

    #[test]
    fn same_seed_gives_bitwise_equal_models() {
        let (x, y) = toy_ranking(40, 6, 13);
        let config = small_config(6);
        let train = TrainConfig {
            epochs: 20,
            ..TrainConfig::new(9)
        };
        let a = train_surrogate(&x, &y, &config, &train, None).unwrap();
        let b = train_surrogate(&x, &y, &config, &train, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x).unwrap());

        let c = train_surrogate(&x, &y, &config, &TrainConfig { seed: 10, ..train }, None).unwrap();
        assert_ne!(a.predict(&x).unwrap(), c.predict(&x).unwrap());
    }

    #[test]
    fn two_samples_train_without_error() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![10.0, 20.0];
        let train = TrainConfig {
            epochs: 10,
            ..TrainConfig::new(1)
        };
        let model = train_surrogate(&x, &y, &small_config(2), &train, None).unwrap();
        assert!(model.final_loss().is_finite());
    }

    #[test]
    fn minibatch_path_is_deterministic_and_finite() {
        let (x, y) = toy_ranking(300, 5, 17);
        let config = small_config(5);
        let train = TrainConfig {
            epochs: 3,
            ..TrainConfig::new(2)
        };
        assert!(x.len() >= train.full_batch_limit);
        let a = train_surrogate(&x, &y, &config, &train, None).unwrap();
        let b = train_surrogate(&x, &y, &config, &train, None).unwrap();
        assert_eq!(a, b);
        let preds = a.predict(&x).unwrap();
        assert!(preds.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn divergence_reports_the_epoch() {
        let (x, y) = toy_ranking(16, 4, 19);
        let config = MlpConfig {
            dropout_p: 0.0,
            ..small_config(4)
        };
        let train = TrainConfig {
            loss: LossKind::Mse,
            learning_rate: 1e200,
            clip_norm: 1e300,
            epochs: 50,
            ..TrainConfig::new(3)
        };
        match train_surrogate(&x, &y, &config, &train, None) {
            Err(Error::NonFiniteLoss { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn fully_tied_targets_are_degenerate() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let y = vec![5.0, 5.0, 5.0];
        let train = TrainConfig {
            epochs: 2,
            ..TrainConfig::new(1)
        };
        assert!(matches!(
            train_surrogate(&x, &y, &small_config(1), &train, None),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn prediction_is_repeatable_and_rng_free() {
        let (x, y) = toy_ranking(30, 4, 23);
        let train = TrainConfig {
            epochs: 10,
            ..TrainConfig::new(4)
        };
        let model = train_surrogate(&x, &y, &small_config(4), &train, None).unwrap();
        let first = model.predict(&x).unwrap();
        // Unrelated rng progress must not influence prediction.
        let _ = seeded_rng(99, "noise").gen::<u64>();
        let second = model.predict(&x).unwrap();
        assert_eq!(first, second);
        assert!(first.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn zero_weight_model_predicts_its_output_bias() {
        let config = small_config(3);
        let record = SerializedSurrogate {
            format: FORMAT_TAG.to_string(),
            config: config.clone(),
            seed: 0,
            final_loss: 0.0,
            weights: vec![
                vec![vec![0.0; 3]; 32],
                vec![vec![0.0; 32]; 32],
                vec![vec![0.0; 32]; 32],
                vec![vec![0.0; 32]; 1],
            ],
            biases: vec![vec![0.0; 32], vec![0.0; 32], vec![0.0; 32], vec![0.7]],
            pca: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zero.json");
        std::fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
        let model = load_surrogate(&path).unwrap();
        let preds = model
            .predict(&[vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 0.0]])
            .unwrap();
        assert_eq!(preds, vec![0.7, 0.7]);
    }

    #[test]
    fn serialization_round_trips_to_identical_predictions() {
        let (x, y) = toy_ranking(48, 7, 29);
        let train = TrainConfig {
            epochs: 15,
            ..TrainConfig::new(6)
        };
        let model = train_surrogate(&x, &y, &small_config(7), &train, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_surrogate(&model, &path).unwrap();
        let loaded = load_surrogate(&path).unwrap();
        assert_eq!(model.predict(&x).unwrap(), loaded.predict(&x).unwrap());
        assert_eq!(loaded.seed(), 6);
    }

    #[test]
    fn version_and_shape_mismatches_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            "{\"format\":\"cole-surrogate/9\",\"config\":{\"input_dim\":1,\"hidden_width\":1,\"hidden_layers\":1,\"negative_slope\":0.01,\"dropout_p\":0.0,\"output_dim\":1},\"seed\":0,\"final_loss\":0.0,\"weights\":[],\"biases\":[],\"pca\":null}",
        )
        .unwrap();
        assert!(load_surrogate(&path).is_err());
    }

    #[test]
    fn attached_projection_is_applied_on_both_paths() {
        let (x, y) = toy_ranking(40, 12, 31);
        let pca = pca_fit(&x, 5).unwrap();
        assert_eq!(pca.k_eff(), 5);
        let config = small_config(5);
        let train = TrainConfig {
            epochs: 30,
            ..TrainConfig::new(8)
        };
        let model = train_surrogate(&x, &y, &config, &train, Some(pca)).unwrap();
        // Raw 12-dim rows are accepted and projected internally.
        let preds = model.predict(&x).unwrap();
        assert_eq!(preds.len(), 40);
        assert!(model.predict(&[vec![0.0; 5]]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pca-model.json");
        save_surrogate(&model, &path).unwrap();
        let loaded = load_surrogate(&path).unwrap();
        assert_eq!(loaded.predict(&x).unwrap(), preds);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (x, y) = toy_ranking(20, 4, 37);
        let train = TrainConfig {
            epochs: 5,
            ..TrainConfig::new(1)
        };
        let model = train_surrogate(&x, &y, &small_config(4), &train, None).unwrap();
        assert!(model.predict(&[vec![1.0, 2.0]]).is_err());
        assert!(train_surrogate(&x, &y, &small_config(5), &train, None).is_err());
    }
}
