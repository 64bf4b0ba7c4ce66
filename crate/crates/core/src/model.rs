//! Linear binary classifier with an analytic binary cross-entropy gradient.

use serde::{Deserialize, Serialize};

use crate::dataset::{GroupData, Split};
use crate::error::{CgdError, Result};
use crate::reweight::{transfer_matrix, TrainerConfig};

/// Weights and bias of `f(x) = w.x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `(w_1, ..., w_d, b)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    pub fn from_vector(v: &[f64]) -> Self {
        assert!(!v.is_empty(), "parameter vector needs at least the bias");
        let (w, b) = v.split_at(v.len() - 1);
        Self {
            weights: w.to_vec(),
            bias: b[0],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean BCE of `params` on one group and its gradient with respect to
/// `(weights, bias)`.
pub fn bce_loss_and_grad(params: &ModelParams, data: &GroupData) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(CgdError::EmptyGroup { group: 0 });
    }
    check_dim(params, data)?;
    let d = params.dim();
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for (x, y) in data.rows() {
        let z = params.logit(x);
        let y = f64::from(y);
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, xj) in grad.iter_mut().zip(x) {
            *g += r * xj;
        }
        grad[d] += r;
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Mean BCE only.
pub fn bce_loss(params: &ModelParams, data: &GroupData) -> Result<f64> {
    if data.is_empty() {
        return Err(CgdError::EmptyGroup { group: 0 });
    }
    check_dim(params, data)?;
    let total: f64 = data
        .rows()
        .map(|(x, y)| {
            let z = params.logit(x);
            softplus(z) - f64::from(y) * z
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Hard labels, `1` iff `w.x + b > 0`.
pub fn predict(params: &ModelParams, data: &GroupData) -> Vec<u8> {
    data.rows()
        .map(|(x, _)| u8::from(params.logit(x) > 0.0))
        .collect()
}

fn check_dim(params: &ModelParams, data: &GroupData) -> Result<()> {
    if params.dim() != data.dim() {
        return Err(CgdError::DimensionMismatch {
            expected: data.dim(),
            found: params.dim(),
        });
    }
    Ok(())
}

/// Per-step, per-group training signal.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    /// Mean BCE per group (plus weight decay when configured).
    pub losses: Vec<f64>,
    /// `losses[i] + C / sqrt(n_i)`.
    pub adjusted_losses: Vec<f64>,
    /// Gradient of each group loss, length `d + 1` (bias last).
    pub grads: Vec<Vec<f64>>,
    /// Pairwise payoff matrix used by the active rule.
    pub transfer: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn k(&self) -> usize {
        self.losses.len()
    }

    /// Row sums of the transfer matrix.
    pub fn payoffs(&self) -> Vec<f64> {
        self.transfer.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Full-batch per-group losses and gradients over `split`, group
/// adjustment, and the rule's transfer matrix.
pub fn group_bundle(
    params: &ModelParams,
    split: &Split,
    config: &TrainerConfig,
) -> Result<GradientBundle> {
    let k = split.k();
    let mut losses = Vec::with_capacity(k);
    let mut grads = Vec::with_capacity(k);
    for (group, data) in split.groups.iter().enumerate() {
        let (mut loss, mut grad) = bce_loss_and_grad(params, data).map_err(|e| match e {
            CgdError::EmptyGroup { .. } => CgdError::EmptyGroup { group },
            other => other,
        })?;
        if config.weight_decay > 0.0 {
            let sq: f64 = params.weights.iter().map(|w| w * w).sum();
            loss += config.weight_decay * sq;
            for (g, w) in grad.iter_mut().zip(&params.weights) {
                *g += 2.0 * config.weight_decay * w;
            }
        }
        losses.push(loss);
        grads.push(grad);
    }
    let adjusted_losses =
        crate::reweight::group_adjust(&losses, &split.counts(), config.adjustment_c);
    let payoff_losses = if config.adjust_payoffs {
        &adjusted_losses
    } else {
        &losses
    };
    let transfer = transfer_matrix(
        config.rule.transfer_kind(),
        payoff_losses,
        &grads,
        config.p_exponent,
    )?;
    Ok(GradientBundle {
        losses,
        adjusted_losses,
        grads,
        transfer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reweight::Rule;
    use proptest::prelude::*;

    fn group(rows: &[(Vec<f64>, u8)]) -> GroupData {
        GroupData::from_rows(rows[0].0.len(), rows).unwrap()
    }

    #[test]
    fn zero_params_give_ln2() {
        let data = group(&[
            (vec![1.0, 2.0], 1),
            (vec![-0.5, 0.3], 1),
            (vec![3.0, -1.0], 0),
        ]);
        let (loss, grad) = bce_loss_and_grad(&ModelParams::zeros(2), &data).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert!((grad[2] - (0.5 - 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn single_sample_gradient() {
        let data = group(&[(vec![1.0, 0.0], 1)]);
        let (_, grad) = bce_loss_and_grad(&ModelParams::zeros(2), &data).unwrap();
        assert_eq!(grad, vec![-0.5, 0.0, -0.5]);
    }

    #[test]
    fn empty_group_is_an_error() {
        assert!(matches!(
            bce_loss_and_grad(&ModelParams::zeros(2), &GroupData::new(2)),
            Err(CgdError::EmptyGroup { .. })
        ));
    }

    #[test]
    fn loss_is_finite_for_huge_margins() {
        let data = group(&[(vec![1.0], 0), (vec![-1.0], 1)]);
        for w in [1e4, -1e4, 700.0, -700.0] {
            let p = ModelParams {
                weights: vec![w],
                bias: 0.0,
            };
            let (loss, grad) = bce_loss_and_grad(&p, &data).unwrap();
            assert!(loss.is_finite() && loss >= 0.0);
            assert!(grad.iter().all(|g| g.is_finite()));
        }
    }

    #[test]
    fn predict_examples() {
        let data = group(&[(vec![1.0, 1.0], 0), (vec![-1.0, -1.0], 0)]);
        assert_eq!(predict(&ModelParams::zeros(2), &data), vec![0, 0]);
        let p = ModelParams {
            weights: vec![1.0, 1.0],
            bias: 0.0,
        };
        assert_eq!(predict(&p, &data), vec![1, 0]);
    }

    #[test]
    fn bundle_single_group_self_transfer() {
        let split = Split {
            groups: vec![group(&[(vec![1.0, 0.5], 1), (vec![-0.2, 0.1], 0)])],
        };
        let params = ModelParams {
            weights: vec![0.3, -0.1],
            bias: 0.05,
        };
        let b = group_bundle(&params, &split, &TrainerConfig::default()).unwrap();
        assert_eq!(b.transfer.len(), 1);
        assert!((b.transfer[0][0] - b.losses[0]).abs() < 1e-15);
        assert_eq!(b.adjusted_losses, b.losses);
    }

    #[test]
    fn bundle_identical_groups() {
        let g = group(&[
            (vec![1.0, 0.5], 1),
            (vec![-0.2, 0.1], 0),
            (vec![0.7, -2.0], 1),
        ]);
        let split = Split {
            groups: vec![g.clone(), g],
        };
        let params = ModelParams {
            weights: vec![0.3, -0.1],
            bias: 0.05,
        };
        for rule in [Rule::Cgd, Rule::CgdRaw] {
            let cfg = TrainerConfig {
                rule,
                ..TrainerConfig::default()
            };
            let b = group_bundle(&params, &split, &cfg).unwrap();
            let t = b.transfer[0][0];
            for row in &b.transfer {
                for v in row {
                    assert_eq!(*v, t);
                }
            }
        }
    }

    #[test]
    fn bundle_reports_empty_group_index() {
        let split = Split {
            groups: vec![group(&[(vec![1.0], 1)]), GroupData::new(1)],
        };
        let err =
            group_bundle(&ModelParams::zeros(1), &split, &TrainerConfig::default()).unwrap_err();
        assert!(matches!(err, CgdError::EmptyGroup { group: 1 }));
    }

    fn finite_difference(params: &ModelParams, data: &GroupData, h: f64) -> Vec<f64> {
        let base = params.to_vector();
        (0..base.len())
            .map(|j| {
                let mut up = base.clone();
                let mut dn = base.clone();
                up[j] += h;
                dn[j] -= h;
                let lu = bce_loss(&ModelParams::from_vector(&up), data).unwrap();
                let ld = bce_loss(&ModelParams::from_vector(&dn), data).unwrap();
                (lu - ld) / (2.0 * h)
            })
            .collect()
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<(Vec<f64>, u8)>)> {
        (2usize..=3).prop_flat_map(|d| {
            (
                prop::collection::vec(-2.0..2.0f64, d + 1),
                prop::collection::vec((prop::collection::vec(-3.0..3.0f64, d), 0u8..=1), 1..=50),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn analytic_gradient_matches_central_differences((theta, rows) in instance()) {
            let data = group(&rows);
            let params = ModelParams::from_vector(&theta);
            let (_, grad) = bce_loss_and_grad(&params, &data).unwrap();
            let fd = finite_difference(&params, &data, 1e-5);
            for (a, n) in grad.iter().zip(&fd) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
                prop_assert!(rel < 1e-6, "analytic {a} vs fd {n}");
            }
        }

        #[test]
        fn bundle_is_permutation_equivariant((theta, rows) in instance(), shift in 0usize..3) {
            let d = theta.len() - 1;
            let chunks: Vec<GroupData> = (0..3)
                .map(|i| {
                    let mut part: Vec<_> = rows.iter().skip(i).step_by(3).cloned().collect();
                    if part.is_empty() {
                        part.push((vec![0.5; d], 1));
                    }
                    group(&part)
                })
                .collect();
            let perm: Vec<usize> = (0..3).map(|i| (i + shift) % 3).collect();
            let permuted = Split { groups: perm.iter().map(|&i| chunks[i].clone()).collect() };
            let split = Split { groups: chunks };
            let params = ModelParams::from_vector(&theta);
            let cfg = TrainerConfig::default();
            let a = group_bundle(&params, &split, &cfg).unwrap();
            let b = group_bundle(&params, &permuted, &cfg).unwrap();
            for (bi, &ai) in perm.iter().enumerate() {
                prop_assert_eq!(b.losses[bi], a.losses[ai]);
                prop_assert_eq!(&b.grads[bi], &a.grads[ai]);
                for (bj, &aj) in perm.iter().enumerate() {
                    prop_assert!((b.transfer[bi][bj] - a.transfer[ai][aj]).abs() < 1e-15);
                }
            }
        }
    }
}
