//! Worst-group / average accuracy, worst-group loss, and cross-seed solution
//! variance.

use serde::{Deserialize, Serialize};

use crate::dataset::Split;
use crate::error::{CgdError, Result};
use crate::model::{bce_loss, predict, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_group_accuracy: Vec<f64>,
    pub per_group_loss: Vec<f64>,
    pub worst_group_accuracy: f64,
    pub average_accuracy: f64,
    pub worst_group_loss: f64,
}

impl EvalReport {
    /// Builds a report from per-group accuracies, losses and sizes.
    pub fn from_parts(
        per_group_accuracy: Vec<f64>,
        per_group_loss: Vec<f64>,
        sizes: &[usize],
    ) -> Self {
        let worst_group_accuracy = per_group_accuracy
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let worst_group_loss = per_group_loss
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let total: usize = sizes.iter().sum();
        let correct: f64 = per_group_accuracy
            .iter()
            .zip(sizes)
            .map(|(a, &n)| a * n as f64)
            .sum();
        Self {
            per_group_accuracy,
            per_group_loss,
            worst_group_accuracy,
            average_accuracy: correct / total as f64,
            worst_group_loss,
        }
    }

    pub fn worst_group_error(&self) -> f64 {
        1.0 - self.worst_group_accuracy
    }
}

pub fn group_accuracy(params: &ModelParams, data: &crate::dataset::GroupData) -> f64 {
    let hits = predict(params, data)
        .iter()
        .zip(data.labels())
        .filter(|(p, y)| p == y)
        .count();
    hits as f64 / data.len() as f64
}

/// Evaluates `params` on every group of `split`.
pub fn evaluate(params: &ModelParams, split: &Split) -> Result<EvalReport> {
    let mut acc = Vec::with_capacity(split.k());
    let mut loss = Vec::with_capacity(split.k());
    for (group, data) in split.groups.iter().enumerate() {
        if data.is_empty() {
            return Err(CgdError::EmptyGroup { group });
        }
        acc.push(group_accuracy(params, data));
        loss.push(bce_loss(params, data)?);
    }
    Ok(EvalReport::from_parts(acc, loss, &split.counts()))
}

/// Minimum per-group accuracy; cheaper than a full [`evaluate`].
pub fn worst_group_accuracy(params: &ModelParams, split: &Split) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for (group, data) in split.groups.iter().enumerate() {
        if data.is_empty() {
            return Err(CgdError::EmptyGroup { group });
        }
        worst = worst.min(group_accuracy(params, data));
    }
    Ok(worst)
}

/// How per-coordinate variances are reduced to one number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceAggregation {
    #[default]
    Sum,
    Mean,
    Max,
}

/// Cross-run dispersion of L-inf normalized parameter vectors (weights and
/// bias), summed over coordinates. Uses the unbiased sample variance.
pub fn solution_variance(params: &[ModelParams]) -> Result<f64> {
    solution_variance_with(params, VarianceAggregation::Sum)
}

pub fn solution_variance_with(
    params: &[ModelParams],
    aggregation: VarianceAggregation,
) -> Result<f64> {
    if params.len() < 2 {
        return Err(CgdError::InvalidConfig(
            "solution variance needs at least two runs".into(),
        ));
    }
    let dim = params[0].dim() + 1;
    let mut normalized = Vec::with_capacity(params.len());
    for (index, p) in params.iter().enumerate() {
        let v = p.to_vector();
        if v.len() != dim {
            return Err(CgdError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        let linf = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if linf < 1e-12 {
            return Err(CgdError::DegenerateSolution { index });
        }
        normalized.push(v.into_iter().map(|x| x / linf).collect::<Vec<_>>());
    }
    let n = normalized.len() as f64;
    let variances = (0..dim).map(|j| {
        let mean = normalized.iter().map(|v| v[j]).sum::<f64>() / n;
        normalized
            .iter()
            .map(|v| (v[j] - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    });
    Ok(match aggregation {
        VarianceAggregation::Sum => variances.sum(),
        VarianceAggregation::Mean => variances.sum::<f64>() / dim as f64,
        VarianceAggregation::Max => variances.fold(0.0, f64::max),
    })
}
