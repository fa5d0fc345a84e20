//! Training losses with analytic gradients.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which loss the surrogate trains against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    /// Rank loss over prediction gaps; epsilon is the required margin on
    /// percent-scale targets.
    PairwiseHinge {
        /// Margin below which a correctly ordered pair still pays.
        epsilon: f64,
    },
    /// Mean squared error.
    Mse,
}

impl LossKind {
    /// The rank loss at its default margin.
    pub fn pairwise_hinge() -> LossKind {
        LossKind::PairwiseHinge { epsilon: 0.1 }
    }
}

impl Default for LossKind {
    fn default() -> Self {
        LossKind::pairwise_hinge()
    }
}

/// Dispatches to the configured loss.
pub fn loss_and_gradient(kind: LossKind, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    match kind {
        LossKind::PairwiseHinge { epsilon } => pairwise_hinge_loss(pred, target, epsilon),
        LossKind::Mse => mse_loss(pred, target),
    }
}

/// Margin rank loss over unordered pairs with distinct targets:
/// mean of max(0, epsilon - sign(y_i - y_j) * (p_i - p_j)).
///
/// Tied-target pairs contribute nothing; the subgradient at the hinge kink
/// is zero. Loss and gradient are normalized by the number of counted
/// pairs, so the scale is batch-size independent.
pub fn pairwise_hinge_loss(pred: &[f64], target: &[f64], epsilon: f64) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "prediction and target lengths differ: {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "pairwise hinge needs at least 2 items, got {}",
            pred.len()
        )));
    }
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if pred.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite prediction or target".into(),
        ));
    }

    let n = pred.len();
    let mut total = 0.0;
    let mut gradient = vec![0.0; n];
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if target[i] == target[j] {
                continue;
            }
            pairs += 1;
            let sign = if target[i] > target[j] { 1.0 } else { -1.0 };
            let term = epsilon - sign * (pred[i] - pred[j]);
            if term > 0.0 {
                total += term;
                gradient[i] -= sign;
                gradient[j] += sign;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Degenerate(
            "all targets are tied; no pairs constrain the ranking".into(),
        ));
    }
    let scale = 1.0 / pairs as f64;
    for g in &mut gradient {
        *g *= scale;
    }
    Ok((total * scale, gradient))
}

/// Mean squared error with gradient 2(pred - target)/n.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "prediction and target lengths differ: {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("mse needs at least 1 item".into()));
    }
    let n = pred.len() as f64;
    let mut total = 0.0;
    let mut gradient = vec![0.0; pred.len()];
    for (k, (p, t)) in pred.iter().zip(target).enumerate() {
        let diff = p - t;
        total += diff * diff;
        gradient[k] = 2.0 * diff / n;
    }
    Ok((total / n, gradient))
}
