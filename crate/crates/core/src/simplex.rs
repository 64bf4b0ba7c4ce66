//! Probability-simplex primitives shared by the reweighting rules and the
//! convergence auditor.
//!
//! Every multiplicative-weights update in this crate is carried out in log
//! space and mapped back to the simplex with a max-shifted softmax, so that
//! large payoffs never overflow `exp`.

use serde::{Deserialize, Serialize};

use crate::error::{CgdError, Result};

/// Gradient norms below this are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

/// Absolute tolerance on `sum(weights) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A point on the (k-1)-simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CgdError::InvalidSimplex("k must be at least 1".into()));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(CgdError::InvalidSimplex(format!(
                "entry {i} = {} is negative or non-finite",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(CgdError::InvalidSimplex(format!("entries sum to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k >= 1, "uniform simplex needs k >= 1");
        Self(vec![1.0 / k as f64; k])
    }

    /// Vertex `e_index` of the simplex.
    pub fn vertex(k: usize, index: usize) -> Self {
        assert!(index < k);
        let mut w = vec![0.0; k];
        w[index] = 1.0;
        Self(w)
    }

    /// Normalizes non-negative finite masses to sum to one.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        if masses.is_empty() {
            return Err(CgdError::InvalidSimplex("k must be at least 1".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(CgdError::NonFiniteInput(
                "masses must be finite and non-negative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(CgdError::InvalidSimplex("masses sum to zero".into()));
        }
        Ok(Self(masses.iter().map(|m| m / total).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = CgdError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(value: SimplexWeights) -> Self {
        value.0
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Unnormalized log-weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(Vec<f64>);

impl LogWeights {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(CgdError::InvalidSimplex("k must be at least 1".into()));
        }
        if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
            return Err(CgdError::NonFiniteInput(format!(
                "logit {i} = {}",
                logits[i]
            )));
        }
        Ok(Self(logits))
    }

    /// All-zero logits, i.e. the uniform distribution.
    pub fn zeros(k: usize) -> Self {
        assert!(k >= 1);
        Self(vec![0.0; k])
    }

    /// Log-space image of a strictly positive simplex point.
    pub fn from_simplex(alpha: &SimplexWeights) -> Result<Self> {
        Self::new(alpha.as_slice().iter().map(|a| a.ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `logit_i += eta * payoff_i`.
    pub fn step(&self, payoffs: &[f64], eta: f64) -> Result<Self> {
        check_dim(self.0.len(), payoffs.len())?;
        Self::new(
            self.0
                .iter()
                .zip(payoffs)
                .map(|(l, p)| l + eta * p)
                .collect(),
        )
    }

    /// Normalized log-probabilities `logit_i - logsumexp(logits)`.
    pub fn log_probabilities(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.0);
        self.0.iter().map(|l| l - lse).collect()
    }

    pub fn to_simplex(&self) -> SimplexWeights {
        softmax(&self.0)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(logits: &[f64]) -> SimplexWeights {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    SimplexWeights(exps.into_iter().map(|e| e / total).collect())
}

/// Max-shifted softmax of finite logits.
pub fn simplex_normalize(logits: &LogWeights) -> SimplexWeights {
    softmax(&logits.0)
}

/// Multiplicative-weights step `alpha_i <- alpha_i * exp(eta * payoff_i) / Z`,
/// evaluated in log space. Zero entries stay zero.
pub fn exponentiated_step(
    alpha: &SimplexWeights,
    payoffs: &[f64],
    eta: f64,
) -> Result<SimplexWeights> {
    check_dim(alpha.len(), payoffs.len())?;
    if payoffs.iter().any(|p| !p.is_finite()) || !eta.is_finite() {
        return Err(CgdError::NonFiniteInput(
            "payoffs and step size must be finite".into(),
        ));
    }
    let logits: Vec<f64> = alpha
        .as_slice()
        .iter()
        .zip(payoffs)
        .map(|(a, p)| {
            if *a > 0.0 {
                a.ln() + eta * p
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    Ok(softmax(&logits))
}

/// `KL(p, q) = sum_i p_i ln(p_i / q_i)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &SimplexWeights, q: &SimplexWeights) -> Result<f64> {
    check_dim(p.len(), q.len())?;
    let mut total = 0.0;
    for (index, (pi, qi)) in p.as_slice().iter().zip(q.as_slice()).enumerate() {
        if *pi == 0.0 {
            continue;
        }
        if *qi == 0.0 {
            return Err(CgdError::SupportMismatch { index });
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// `KL(uniform, softmax(logits))`, computed without leaving log space.
pub fn kl_uniform_to(logits: &LogWeights) -> f64 {
    let k = logits.len() as f64;
    let log_u = -(k.ln());
    let kl: f64 = logits
        .log_probabilities()
        .iter()
        .map(|lq| (log_u - lq) / k)
        .sum();
    kl.max(0.0)
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine of the angle between `u` and `v`; zero if either norm is below
/// [`NORM_EPS`].
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(u.len(), v.len())?;
    let (nu, nv) = (norm(u), norm(v));
    if nu < NORM_EPS || nv < NORM_EPS {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Index of the minimum, lowest index on ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(CgdError::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_zero_logits_is_uniform() {
        let w = simplex_normalize(&LogWeights::new(vec![0.0; 3]).unwrap());
        for x in w.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_ln2() {
        let w = simplex_normalize(&LogWeights::new(vec![2f64.ln(), 0.0]).unwrap());
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_large_logits() {
        let w = simplex_normalize(&LogWeights::new(vec![1000.0, 1000.0, 999.0]).unwrap());
        assert!(w.as_slice().iter().all(|x| x.is_finite()));
        assert_eq!(w[0], w[1]);
        assert!(w[0] > w[2]);
    }

    #[test]
    fn non_finite_logits_rejected() {
        assert!(matches!(
            LogWeights::new(vec![0.0, f64::NAN]),
            Err(CgdError::NonFiniteInput(_))
        ));
        assert!(LogWeights::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexWeights::new(vec![]).is_err());
        assert!(SimplexWeights::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexWeights::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexWeights::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn kl_examples() {
        let u = SimplexWeights::uniform(3);
        assert_eq!(kl_divergence(&u, &u).unwrap(), 0.0);

        let p = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        let q = SimplexWeights::uniform(2);
        assert!((kl_divergence(&p, &q).unwrap() - 2f64.ln()).abs() < 1e-15);

        let q = SimplexWeights::new(vec![0.9, 0.1]).unwrap();
        let expected = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        let got = kl_divergence(&SimplexWeights::uniform(2), &q).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.5108).abs() < 1e-4);
    }

    #[test]
    fn kl_errors() {
        let p = SimplexWeights::uniform(2);
        let q = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            kl_divergence(&p, &q),
            Err(CgdError::SupportMismatch { index: 1 })
        ));
        assert!(matches!(
            kl_divergence(&p, &SimplexWeights::uniform(3)),
            Err(CgdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kl_uniform_matches_direct() {
        let logits = LogWeights::new(vec![0.3, -1.2, 2.0]).unwrap();
        let direct = kl_divergence(&SimplexWeights::uniform(3), &logits.to_simplex()).unwrap();
        assert!((kl_uniform_to(&logits) - direct).abs() < 1e-14);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&[3.0, 4.0], &[6.0, 8.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exponentiated_step_keeps_zero_support() {
        let a = SimplexWeights::new(vec![0.5, 0.5, 0.0]).unwrap();
        let b = exponentiated_step(&a, &[1.0, 0.0, 100.0], 2f64.ln()).unwrap();
        assert_eq!(b[2], 0.0);
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    fn logits_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0..50.0f64, 1..8)
    }

    proptest! {
        #[test]
        fn normalize_sums_to_one_and_is_shift_invariant(l in logits_strategy(), c in -500.0..500.0f64) {
            let a = simplex_normalize(&LogWeights::new(l.clone()).unwrap());
            let b = simplex_normalize(&LogWeights::new(l.iter().map(|x| x + c).collect()).unwrap());
            prop_assert!((a.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                let scale = x.abs().max(y.abs());
                if scale > 0.0 {
                    prop_assert!((x - y).abs() / scale < 1e-12);
                }
            }
        }

        #[test]
        fn normalize_preserves_order(l in logits_strategy()) {
            let a = simplex_normalize(&LogWeights::new(l.clone()).unwrap());
            for i in 0..l.len() {
                for j in 0..l.len() {
                    if l[i] > l[j] {
                        prop_assert!(a[i] >= a[j]);
                    }
                }
            }
        }

        #[test]
        fn kl_non_negative(p in prop::collection::vec(0.01..1.0f64, 2..6), q in prop::collection::vec(0.01..1.0f64, 2..6)) {
            let k = p.len().min(q.len());
            let p = SimplexWeights::from_masses(&p[..k]).unwrap();
            let q = SimplexWeights::from_masses(&q[..k]).unwrap();
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
        }

        #[test]
        fn cosine_positive_scale_invariant(
            u in prop::collection::vec(-10.0..10.0f64, 3),
            v in prop::collection::vec(-10.0..10.0f64, 3),
            c in 0.01..100.0f64,
            d in 0.01..100.0f64,
        ) {
            let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
            let dv: Vec<f64> = v.iter().map(|x| d * x).collect();
            let a = cosine_similarity(&u, &v).unwrap();
            let b = cosine_similarity(&cu, &dv).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }
}
