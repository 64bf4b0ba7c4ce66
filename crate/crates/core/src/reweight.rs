//! Group-weighting rules.
//!
//! Exponentiated rules (CGD, CGD-raw, ERM-CG, Group-DRO-EG) share one shape:
//! each group gets a scalar payoff, and `alpha_i <- alpha_i exp(eta_alpha * payoff_i) / Z`.
//! They differ only in the payoff:
//!
//! | rule           | payoff of group `i`                              |
//! |----------------|--------------------------------------------------|
//! | `Cgd`          | `sum_j (l_i l_j)^p cos(g_i, g_j)`                |
//! | `CgdRaw`       | `<g_i, sum_j g_j>`                               |
//! | `ErmCg`        | `sum_j <g_i, g_j>`                               |
//! | `GroupDroEg`   | `l_i`                                            |
//!
//! Static rules (ERM, ERM-UW) fix `alpha` once; `GroupDroHard` and `SqrtGd`
//! recompute it from the current losses every step.

use serde::{Deserialize, Serialize};

use crate::error::{CgdError, Result};
use crate::model::{GradientBundle, ModelParams};
use crate::simplex::{
    argmax, cosine_similarity, dot, exponentiated_step, norm, SimplexWeights, NORM_EPS,
};

/// Floor added to losses before the inverse square root in Sqrt-GD.
pub const SQRT_GD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "ERM")]
    Erm,
    #[serde(rename = "ERM_UW")]
    ErmUw,
    #[serde(rename = "GROUP_DRO_HARD")]
    GroupDroHard,
    #[serde(rename = "GROUP_DRO_EG")]
    GroupDroEg,
    #[serde(rename = "CGD")]
    Cgd,
    #[serde(rename = "CGD_RAW")]
    CgdRaw,
    #[serde(rename = "ERM_CG")]
    ErmCg,
    #[serde(rename = "SQRT_GD")]
    SqrtGd,
}

impl Rule {
    pub const ALL: [Rule; 8] = [
        Rule::Erm,
        Rule::ErmUw,
        Rule::GroupDroHard,
        Rule::GroupDroEg,
        Rule::Cgd,
        Rule::CgdRaw,
        Rule::ErmCg,
        Rule::SqrtGd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Erm => "ERM",
            Rule::ErmUw => "ERM_UW",
            Rule::GroupDroHard => "GROUP_DRO_HARD",
            Rule::GroupDroEg => "GROUP_DRO_EG",
            Rule::Cgd => "CGD",
            Rule::CgdRaw => "CGD_RAW",
            Rule::ErmCg => "ERM_CG",
            Rule::SqrtGd => "SQRT_GD",
        }
    }

    pub fn transfer_kind(self) -> TransferKind {
        match self {
            Rule::Cgd => TransferKind::ScaledCosine,
            Rule::GroupDroEg | Rule::GroupDroHard => TransferKind::Diagonal,
            _ => TransferKind::InnerProduct,
        }
    }

    /// True for rules that carry `alpha` forward with a multiplicative update.
    pub fn is_exponentiated(self) -> bool {
        matches!(
            self,
            Rule::Cgd | Rule::CgdRaw | Rule::ErmCg | Rule::GroupDroEg
        )
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rule {
    type Err = CgdError;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| CgdError::InvalidConfig(format!("unknown rule {s:?}")))
    }
}

/// How the k x k transfer matrix of a [`GradientBundle`] is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferKind {
    /// `(l_i l_j)^p cos(g_i, g_j)`.
    ScaledCosine,
    /// `<g_i, g_j>`.
    InnerProduct,
    /// `diag(l_i)`: groups that do not interact.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub eta: f64,
    pub eta_alpha: f64,
    pub p_exponent: f64,
    pub adjustment_c: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub rule: Rule,
    pub seed: u64,
    /// Feed adjusted losses into the CGD / Group-DRO payoffs (otherwise raw
    /// losses are used and the adjustment only affects hard selection).
    pub adjust_payoffs: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            eta_alpha: 0.1,
            p_exponent: 0.5,
            adjustment_c: 0.0,
            epochs: 400,
            weight_decay: 0.0,
            rule: Rule::Cgd,
            seed: 0,
            adjust_payoffs: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CgdError::InvalidConfig(m.to_string()));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(self.eta_alpha >= 0.0 && self.eta_alpha.is_finite()) {
            return bad("eta_alpha must be non-negative");
        }
        if !(self.p_exponent > 0.0 && self.p_exponent.is_finite()) {
            return bad("p_exponent must be positive");
        }
        if !(self.adjustment_c >= 0.0 && self.adjustment_c.is_finite()) {
            return bad("adjustment_c must be non-negative");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        Ok(())
    }
}

/// `grad / |grad| * loss^p`, or zero when `|grad| < NORM_EPS`.
pub fn scaled_gradient(grad: &[f64], loss: f64, p: f64) -> Vec<f64> {
    let n = norm(grad);
    if n < NORM_EPS {
        return vec![0.0; grad.len()];
    }
    let s = loss.powf(p) / n;
    grad.iter().map(|g| g * s).collect()
}

pub fn transfer_matrix(
    kind: TransferKind,
    losses: &[f64],
    grads: &[Vec<f64>],
    p: f64,
) -> Result<Vec<Vec<f64>>> {
    let k = grads.len();
    crate::simplex::check_dim(k, losses.len())?;
    let mut t = vec![vec![0.0; k]; k];
    match kind {
        TransferKind::ScaledCosine => {
            check_non_negative(losses)?;
            let scale: Vec<f64> = losses.iter().map(|l| l.powf(p)).collect();
            for i in 0..k {
                for j in i..k {
                    let v = scale[i] * scale[j] * cosine_similarity(&grads[i], &grads[j])?;
                    t[i][j] = v;
                    t[j][i] = v;
                }
            }
        }
        TransferKind::InnerProduct => {
            for i in 0..k {
                for j in i..k {
                    let v = dot(&grads[i], &grads[j]);
                    t[i][j] = v;
                    t[j][i] = v;
                }
            }
        }
        TransferKind::Diagonal => {
            for i in 0..k {
                t[i][i] = losses[i];
            }
        }
    }
    Ok(t)
}

fn check_non_negative(losses: &[f64]) -> Result<()> {
    match losses.iter().position(|l| *l < 0.0 || l.is_nan()) {
        Some(group) => Err(CgdError::NegativeLoss {
            group,
            value: losses[group],
        }),
        None => Ok(()),
    }
}

/// `<g_i, sum_j g_j>` for every group.
pub fn raw_payoffs(grads: &[Vec<f64>]) -> Vec<f64> {
    let total = sum_vectors(grads);
    grads.iter().map(|g| dot(g, &total)).collect()
}

/// `sum_j <g_i, g_j>` for every group.
pub fn pairwise_payoffs(grads: &[Vec<f64>]) -> Vec<f64> {
    grads
        .iter()
        .map(|gi| grads.iter().map(|gj| dot(gi, gj)).sum())
        .collect()
}

/// Payoff vector of an exponentiated rule, `None` for the others.
pub fn rule_payoffs(rule: Rule, bundle: &GradientBundle) -> Result<Option<Vec<f64>>> {
    Ok(match rule {
        Rule::Cgd => {
            check_non_negative(&bundle.adjusted_losses)?;
            Some(bundle.payoffs())
        }
        Rule::CgdRaw => Some(raw_payoffs(&bundle.grads)),
        Rule::ErmCg => Some(pairwise_payoffs(&bundle.grads)),
        Rule::GroupDroEg => Some(bundle.adjusted_losses.clone()),
        _ => None,
    })
}

/// Loss-scaled cosine update; payoffs are the row sums of `bundle.transfer`.
pub fn cgd_alpha_update(
    alpha: &SimplexWeights,
    bundle: &GradientBundle,
    eta_alpha: f64,
) -> Result<SimplexWeights> {
    check_non_negative(&bundle.adjusted_losses)?;
    exponentiated_step(alpha, &bundle.payoffs(), eta_alpha)
}

/// Raw inner-product update `alpha_i ∝ alpha_i exp(eta_alpha <g_i, sum_j g_j>)`.
pub fn cgd_raw_alpha_update(
    alpha: &SimplexWeights,
    grads: &[Vec<f64>],
    eta_alpha: f64,
) -> Result<SimplexWeights> {
    exponentiated_step(alpha, &raw_payoffs(grads), eta_alpha)
}

/// Exponentiated gradient ascent on `alpha^T G 1` with `G_ij = <g_i, g_j>`.
pub fn erm_cg_alpha_update(
    alpha: &SimplexWeights,
    bundle: &GradientBundle,
    eta_alpha: f64,
) -> Result<SimplexWeights> {
    exponentiated_step(alpha, &pairwise_payoffs(&bundle.grads), eta_alpha)
}

/// Highest adjusted loss, lowest index on ties.
pub fn group_dro_hard_select(adjusted_losses: &[f64]) -> usize {
    argmax(adjusted_losses)
}

pub fn group_dro_eg_update(
    alpha: &SimplexWeights,
    adjusted_losses: &[f64],
    eta_alpha: f64,
) -> Result<SimplexWeights> {
    exponentiated_step(alpha, adjusted_losses, eta_alpha)
}

/// Population weights `n_i / sum(n)`.
pub fn erm_weights(group_counts: &[usize]) -> Result<SimplexWeights> {
    check_counts(group_counts)?;
    let masses: Vec<f64> = group_counts.iter().map(|&n| n as f64).collect();
    SimplexWeights::from_masses(&masses)
}

/// Static size-based weights `alpha_i ∝ exp(c / sqrt(n_i))`.
pub fn erm_uw_weights(group_counts: &[usize], c: f64) -> Result<SimplexWeights> {
    check_counts(group_counts)?;
    let logits: Vec<f64> = group_counts
        .iter()
        .map(|&n| c / (n as f64).sqrt())
        .collect();
    Ok(crate::simplex::simplex_normalize(
        &crate::simplex::LogWeights::new(logits)?,
    ))
}

/// Weights `∝ 1 / sqrt(l_i + 1e-8)`, i.e. the direction of descent on `sum_i sqrt(l_i)`.
pub fn sqrt_gd_weights(losses: &[f64]) -> Result<SimplexWeights> {
    check_non_negative(losses)?;
    let masses: Vec<f64> = losses
        .iter()
        .map(|l| 1.0 / (l + SQRT_GD_EPS).sqrt())
        .collect();
    SimplexWeights::from_masses(&masses)
}

/// `l_i + c / sqrt(n_i)`.
pub fn group_adjust(losses: &[f64], group_counts: &[usize], c: f64) -> Vec<f64> {
    if c == 0.0 {
        return losses.to_vec();
    }
    losses
        .iter()
        .zip(group_counts)
        .map(|(l, &n)| l + c / (n.max(1) as f64).sqrt())
        .collect()
}

fn check_counts(group_counts: &[usize]) -> Result<()> {
    if group_counts.is_empty() {
        return Err(CgdError::InvalidConfig("no groups".into()));
    }
    if let Some(group) = group_counts.iter().position(|&n| n == 0) {
        return Err(CgdError::EmptyGroup { group });
    }
    Ok(())
}

pub fn sum_vectors(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut total = vec![0.0; vs.first().map_or(0, Vec::len)];
    for v in vs {
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    total
}

/// `sum_i alpha_i g_i`.
pub fn mixed_gradient(alpha: &SimplexWeights, grads: &[Vec<f64>]) -> Vec<f64> {
    let mut total = vec![0.0; grads.first().map_or(0, Vec::len)];
    for (a, g) in alpha.as_slice().iter().zip(grads) {
        for (t, x) in total.iter_mut().zip(g) {
            *t += a * x;
        }
    }
    total
}

/// `theta - eta * sum_i alpha_i g_i`.
pub fn parameter_step(
    params: &ModelParams,
    alpha: &SimplexWeights,
    grads: &[Vec<f64>],
    eta: f64,
) -> Result<ModelParams> {
    crate::simplex::check_dim(alpha.len(), grads.len())?;
    let theta = params.to_vector();
    for g in grads {
        crate::simplex::check_dim(theta.len(), g.len())?;
    }
    let step = mixed_gradient(alpha, grads);
    let next: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t - eta * s).collect();
    Ok(ModelParams::from_vector(&next))
}
