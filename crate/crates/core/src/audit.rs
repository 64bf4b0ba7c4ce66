//! Executable checks for the convergence argument of the raw (inner-product)
//! update.
//!
//! The argument runs, per step `t`, with `g_i = grad l_i(theta^t)`,
//! `g = (1/k) sum_i g_i = grad R(theta^t)` and `alpha* = uniform`:
//!
//! 1. mirror step:  `-sum_i a^t_i <g_i,g> <= -|g|^2 + (KL_t - KL_{t+1}) / eta_a + eta_a G^4`
//! 2. covariance:   `sum_i a^t_i <g_i,g> <= sum_i a^{t+1}_i <g_i,g>`
//! 3. descent:      `|g|^2 <= (R_t - R_{t+1}) / eta + (KL_t - KL_{t+1}) / eta_a + eta_a G^4 + eta L G^2 / 2`
//!
//! and, summed over `T` steps with the prescribed step sizes,
//! `(1/T) sum_t |grad R(theta^t)|^2 <= 3 sqrt(B L G^2 / T)`.
//!
//! Checks run on sums of sigmoids, `l_i(theta) = sigmoid(a_i . theta + b_i)`,
//! whose constants are known in closed form. Only the raw update is covered;
//! the loss-scaled rule used in experiments is outside the argument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{GroupData, Split};
use crate::error::{CgdError, Result};
use crate::model::{bce_loss, bce_loss_and_grad, sigmoid, ModelParams};
use crate::reweight::{mixed_gradient, sum_vectors};
use crate::simplex::{
    argmax, argmin, dot, kl_divergence, kl_uniform_to, norm, LogWeights, SimplexWeights,
};

/// Absolute slack for the per-step and rate inequalities.
pub const INEQUALITY_TOL: f64 = 1e-9;
/// Absolute slack for covariance monotonicity.
pub const COVARIANCE_TOL: f64 = 1e-12;

/// `sup |sigmoid''| = 1 / (6 sqrt 3)`.
pub fn sigmoid_curvature_bound() -> f64 {
    1.0 / (6.0 * 3f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// `G`: every group loss is G-Lipschitz.
    pub lipschitz: f64,
    /// `L`: the group-average loss is L-smooth.
    pub smoothness: f64,
    /// `B`: `|R| <= B`.
    pub bound: f64,
    /// `T`.
    pub horizon: usize,
    pub epsilon: f64,
}

impl TheoremConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.lipschitz)
            && ok(self.smoothness)
            && ok(self.bound)
            && ok(self.epsilon)
            && self.horizon > 0)
        {
            return Err(CgdError::InvalidConfig(format!(
                "theorem constants must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Right-hand side of the rate bound, `3 sqrt(B L G^2 / T)`.
    pub fn fosp_bound(&self) -> f64 {
        3.0 * (self.bound * self.smoothness * self.lipschitz.powi(2) / self.horizon as f64).sqrt()
    }

    /// Smallest `T` with `3 sqrt(B L G^2 / T) <= epsilon^2`, so that the best
    /// iterate is an epsilon-stationary point.
    pub fn horizon_for_epsilon(&self) -> usize {
        let t = 9.0 * self.bound * self.smoothness * self.lipschitz.powi(2) / self.epsilon.powi(4);
        t.ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub eta: f64,
    pub eta_alpha: f64,
}

/// `eta = 2 sqrt(B / (L G^2 T))`, `eta_alpha = sqrt(B L / (G^6 T))`.
pub fn theorem_step_sizes(c: &TheoremConstants) -> Result<StepSizes> {
    c.validate()?;
    let (g, l, b, t) = (c.lipschitz, c.smoothness, c.bound, c.horizon as f64);
    let eta = 2.0 * (b / (l * g * g * t)).sqrt();
    let eta_alpha = (b * l / (g.powi(6) * t)).sqrt();
    let limit = 1.0 / (g * g);
    if eta_alpha > limit {
        return Err(CgdError::StepSizeTooLarge { eta_alpha, limit });
    }
    Ok(StepSizes { eta, eta_alpha })
}

/// Group losses `l_i(theta) = sigmoid(a_i . theta + b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidProblem {
    pub directions: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl SigmoidProblem {
    pub fn new(directions: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if directions.is_empty() || directions.len() != offsets.len() {
            return Err(CgdError::InvalidConfig(
                "need one offset per direction".into(),
            ));
        }
        let d = directions[0].len();
        if d == 0 || directions.iter().any(|a| a.len() != d) {
            return Err(CgdError::InvalidConfig(
                "directions must share a positive dimension".into(),
            ));
        }
        Ok(Self {
            directions,
            offsets,
        })
    }

    /// Entries of `a_i` and `b_i` uniform in `[-1, 1]`.
    pub fn random(seed: u64, k: usize, d: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((k as u64) << 16) | d as u64);
        let directions = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let offsets = (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self {
            directions,
            offsets,
        }
    }

    /// All directions zero: every loss is constant.
    pub fn flat(k: usize, d: usize) -> Self {
        Self {
            directions: vec![vec![0.0; d]; k],
            offsets: (0..k).map(|i| i as f64 * 0.25 - 0.5).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn losses(&self, theta: &[f64]) -> Vec<f64> {
        self.directions
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| sigmoid(dot(a, theta) + b))
            .collect()
    }

    pub fn grads(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.directions
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| {
                let s = sigmoid(dot(a, theta) + b);
                let ds = s * (1.0 - s);
                a.iter().map(|x| ds * x).collect()
            })
            .collect()
    }

    /// Group-average loss `R`.
    pub fn risk(&self, theta: &[f64]) -> f64 {
        self.losses(theta).iter().sum::<f64>() / self.k() as f64
    }

    /// `G = max |a_i| / 4`, `L = max |a_i|^2 / (6 sqrt 3)`, `B = 1`. A flat
    /// problem gets `G = L = 1`, which still bounds it.
    pub fn certified_constants(&self, horizon: usize, epsilon: f64) -> TheoremConstants {
        let amax = self.directions.iter().map(|a| norm(a)).fold(0.0, f64::max);
        let (lipschitz, smoothness) = if amax > 0.0 {
            (amax / 4.0, amax * amax * sigmoid_curvature_bound())
        } else {
            (1.0, 1.0)
        };
        TheoremConstants {
            lipschitz,
            smoothness,
            bound: 1.0,
            horizon,
            epsilon,
        }
    }
}

/// Mean of the group gradients, i.e. `grad R`.
pub fn mean_gradient(grads: &[Vec<f64>]) -> Vec<f64> {
    let k = grads.len() as f64;
    sum_vectors(grads).into_iter().map(|x| x / k).collect()
}

/// Payoffs `<g_i, g>` with `g` the mean gradient.
pub fn mean_form_payoffs(grads: &[Vec<f64>]) -> Vec<f64> {
    let g = mean_gradient(grads);
    grads.iter().map(|gi| dot(gi, &g)).collect()
}

/// Raw update in the mean form used by the convergence argument.
pub fn mean_form_update(
    logits: &LogWeights,
    grads: &[Vec<f64>],
    eta_alpha: f64,
) -> Result<LogWeights> {
    logits.step(&mean_form_payoffs(grads), eta_alpha)
}

fn check_hypotheses(grads: &[Vec<f64>], eta_alpha: f64, lipschitz: f64) -> Result<()> {
    if eta_alpha.is_nan() || eta_alpha <= 0.0 {
        return Err(CgdError::HypothesisViolated(format!(
            "eta_alpha = {eta_alpha} must be positive"
        )));
    }
    let limit = 1.0 / (lipschitz * lipschitz);
    if eta_alpha > limit {
        return Err(CgdError::HypothesisViolated(format!(
            "eta_alpha = {eta_alpha} > 1/G^2 = {limit}"
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        let n = norm(g);
        if n > lipschitz * (1.0 + 1e-12) {
            return Err(CgdError::HypothesisViolated(format!(
                "|g_{i}| = {n} > G = {lipschitz}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            lhs,
            rhs,
            passed: lhs <= rhs + tol,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn mirror_terms(
    alpha_t: &[f64],
    kl_t: f64,
    kl_t1: f64,
    grads: &[Vec<f64>],
    eta_alpha: f64,
    lipschitz: f64,
) -> InequalityCheck {
    let g = mean_gradient(grads);
    let avg_ip: f64 = alpha_t
        .iter()
        .zip(grads)
        .map(|(a, gi)| a * dot(gi, &g))
        .sum();
    let lhs = -avg_ip;
    let rhs = -dot(&g, &g) + (kl_t - kl_t1) / eta_alpha + eta_alpha * lipschitz.powi(4);
    InequalityCheck::new(lhs, rhs, INEQUALITY_TOL)
}

/// Mirror-descent step inequality with `alpha* = uniform`.
pub fn check_mirror_inequality(
    alpha_t: &SimplexWeights,
    alpha_t1: &SimplexWeights,
    grads: &[Vec<f64>],
    eta_alpha: f64,
    lipschitz: f64,
) -> Result<InequalityCheck> {
    check_hypotheses(grads, eta_alpha, lipschitz)?;
    let u = SimplexWeights::uniform(alpha_t.len());
    let kl_t = kl_divergence(&u, alpha_t)?;
    let kl_t1 = kl_divergence(&u, alpha_t1)?;
    Ok(mirror_terms(
        alpha_t.as_slice(),
        kl_t,
        kl_t1,
        grads,
        eta_alpha,
        lipschitz,
    ))
}

/// `before = sum_i a^t_i <g_i, g>`, `after = sum_i a^{t+1}_i <g_i, g>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub before: f64,
    pub after: f64,
    pub passed: bool,
}

pub fn check_covariance_monotonicity(
    alpha_t: &SimplexWeights,
    alpha_t1: &SimplexWeights,
    grads: &[Vec<f64>],
) -> CovarianceCheck {
    let p = mean_form_payoffs(grads);
    let before = dot(alpha_t.as_slice(), &p);
    let after = dot(alpha_t1.as_slice(), &p);
    CovarianceCheck {
        before,
        after,
        passed: before <= after + COVARIANCE_TOL,
    }
}

/// One step of the audited algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub theta_before: Vec<f64>,
    pub theta_after: Vec<f64>,
    pub alpha_before: SimplexWeights,
    pub alpha_after: SimplexWeights,
    /// Group gradients at `theta_before`.
    pub grads: Vec<Vec<f64>>,
}

fn descent_terms(
    risk_t: f64,
    risk_t1: f64,
    kl_t: f64,
    kl_t1: f64,
    grads: &[Vec<f64>],
    constants: &TheoremConstants,
    sizes: StepSizes,
) -> InequalityCheck {
    let g = mean_gradient(grads);
    let (gl, l) = (constants.lipschitz, constants.smoothness);
    let rhs = (risk_t - risk_t1) / sizes.eta
        + (kl_t - kl_t1) / sizes.eta_alpha
        + sizes.eta_alpha * gl.powi(4)
        + sizes.eta * l * gl * gl / 2.0;
    InequalityCheck::new(dot(&g, &g), rhs, INEQUALITY_TOL)
}

/// Per-step descent bound on `|grad R(theta^t)|^2`.
pub fn check_descent_inequality(
    problem: &SigmoidProblem,
    step: &Transition,
    constants: &TheoremConstants,
    sizes: StepSizes,
) -> Result<InequalityCheck> {
    check_hypotheses(&step.grads, sizes.eta_alpha, constants.lipschitz)?;
    let u = SimplexWeights::uniform(step.alpha_before.len());
    Ok(descent_terms(
        problem.risk(&step.theta_before),
        problem.risk(&step.theta_after),
        kl_divergence(&u, &step.alpha_before)?,
        kl_divergence(&u, &step.alpha_after)?,
        &step.grads,
        constants,
        sizes,
    ))
}

/// All per-step quantities for epoch `epoch` (0-based `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub epoch: usize,
    pub kl_to_uniform: f64,
    pub mirror: InequalityCheck,
    pub covariance: CovarianceCheck,
    pub descent: InequalityCheck,
}

impl StepReport {
    pub fn passed(&self) -> bool {
        self.mirror.passed && self.covariance.passed && self.descent.passed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FospCheck {
    /// `(1/T) sum_{t<T} |grad R(theta^t)|^2`.
    pub avg_grad_sq: f64,
    /// `min_t |grad R(theta^t)|`.
    pub min_grad_norm: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRun {
    pub sizes: StepSizes,
    pub steps: Vec<StepReport>,
    pub fosp: FospCheck,
}

/// Runs `T = constants.horizon` steps of the mean-form raw update from
/// `theta = 0`, `alpha = uniform`, checking every inequality on the way.
pub fn run_audit(problem: &SigmoidProblem, constants: &TheoremConstants) -> Result<AuditRun> {
    let sizes = theorem_step_sizes(constants)?;
    let k = problem.k();
    let mut theta = vec![0.0; problem.dim()];
    let mut logits = LogWeights::zeros(k);
    let mut kl_t = kl_uniform_to(&logits);
    let mut risk_t = problem.risk(&theta);
    let mut steps = Vec::with_capacity(constants.horizon);
    let mut grad_sq_sum = 0.0;
    let mut min_grad_norm = f64::INFINITY;

    for epoch in 0..constants.horizon {
        let grads = problem.grads(&theta);
        check_hypotheses(&grads, sizes.eta_alpha, constants.lipschitz)?;
        let g = mean_gradient(&grads);
        let g_sq = dot(&g, &g);
        grad_sq_sum += g_sq;
        min_grad_norm = min_grad_norm.min(g_sq.sqrt());

        let alpha_t = logits.to_simplex();
        let next = mean_form_update(&logits, &grads, sizes.eta_alpha)?;
        let alpha_t1 = next.to_simplex();
        let kl_t1 = kl_uniform_to(&next);

        let step = mixed_gradient(&alpha_t1, &grads);
        let theta_next: Vec<f64> = theta
            .iter()
            .zip(&step)
            .map(|(t, s)| t - sizes.eta * s)
            .collect();
        let risk_t1 = problem.risk(&theta_next);

        steps.push(StepReport {
            epoch,
            kl_to_uniform: kl_t,
            mirror: mirror_terms(
                alpha_t.as_slice(),
                kl_t,
                kl_t1,
                &grads,
                sizes.eta_alpha,
                constants.lipschitz,
            ),
            covariance: check_covariance_monotonicity(&alpha_t, &alpha_t1, &grads),
            descent: descent_terms(risk_t, risk_t1, kl_t, kl_t1, &grads, constants, sizes),
        });

        theta = theta_next;
        logits = next;
        kl_t = kl_t1;
        risk_t = risk_t1;
    }

    let avg_grad_sq = grad_sq_sum / constants.horizon as f64;
    let bound = constants.fosp_bound();
    Ok(AuditRun {
        sizes,
        steps,
        fosp: FospCheck {
            avg_grad_sq,
            min_grad_norm,
            bound,
            passed: avg_grad_sq <= bound + INEQUALITY_TOL,
        },
    })
}

/// Rate check alone.
pub fn check_fosp_rate(
    problem: &SigmoidProblem,
    constants: &TheoremConstants,
) -> Result<FospCheck> {
    Ok(run_audit(problem, constants)?.fosp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaylorPick {
    pub taylor: usize,
    pub exact: usize,
    pub agree: bool,
}

/// Compares the first-order choice `argmax_j sum_i <g_i, g_j>` with the
/// brute-force `argmin_j sum_i l_i(theta - eta g_j)` on BCE group losses.
pub fn taylor_selection_oracle(
    params: &ModelParams,
    split: &Split,
    eta: f64,
) -> Result<TaylorPick> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(CgdError::InvalidConfig("eta must be positive".into()));
    }
    let mut grads = Vec::with_capacity(split.k());
    for (group, data) in split.groups.iter().enumerate() {
        let (_, g) = bce_loss_and_grad(params, data).map_err(|e| match e {
            CgdError::EmptyGroup { .. } => CgdError::EmptyGroup { group },
            other => other,
        })?;
        grads.push(g);
    }
    let scores: Vec<f64> = grads
        .iter()
        .map(|gj| grads.iter().map(|gi| dot(gi, gj)).sum())
        .collect();
    let theta = params.to_vector();
    let mut totals = Vec::with_capacity(grads.len());
    for gj in &grads {
        let moved: Vec<f64> = theta.iter().zip(gj).map(|(t, g)| t - eta * g).collect();
        let p = ModelParams::from_vector(&moved);
        let mut total = 0.0;
        for data in &split.groups {
            total += bce_loss(&p, data)?;
        }
        totals.push(total);
    }
    let taylor = argmax(&scores);
    let exact = argmin(&totals);
    Ok(TaylorPick {
        taylor,
        exact,
        agree: taylor == exact,
    })
}

/// Random BCE instance for the Taylor oracle: `k` in 1..=5 groups of 5..=30
/// examples in dimension 1..=4, each group with its own noisy linear rule.
pub fn random_taylor_instance(seed: u64) -> (ModelParams, Split) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=5);
    let d = rng.random_range(1..=4);
    let params = ModelParams::from_vector(
        &(0..=d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<_>>(),
    );
    let groups = (0..k)
        .map(|_| {
            let rule: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = rng.random_range(5..=30);
            let mut g = GroupData::new(d);
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let noisy = rng.random_bool(0.1);
                let y = u8::from(dot(&rule, &x) > 0.0) ^ u8::from(noisy);
                g.push(&x, y).expect("dimensions match");
            }
            g
        })
        .collect();
    (params, Split { groups })
}

/// Worst margin and first failure of one inequality across many runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub passed: usize,
    pub total: usize,
    /// `min(rhs - lhs)`; for covariance `min(after - before)`.
    pub worst_margin: f64,
    pub first_failure: Option<FailureSite>,
}

impl Default for CheckTally {
    fn default() -> Self {
        Self {
            passed: 0,
            total: 0,
            worst_margin: f64::INFINITY,
            first_failure: None,
        }
    }
}

impl CheckTally {
    fn record(&mut self, passed: bool, margin: f64, site: impl FnOnce() -> FailureSite) {
        self.total += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if passed {
            self.passed += 1;
        } else if self.first_failure.is_none() {
            self.first_failure = Some(site());
        }
    }

    fn merge(&mut self, other: CheckTally) {
        self.passed += other.passed;
        self.total += other.total;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
    }

    pub fn pass_rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSite {
    pub seed: u64,
    pub k: usize,
    pub d: usize,
    pub epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: usize,
    pub skipped: Option<String>,
    pub problems: usize,
    pub mirror: CheckTally,
    pub covariance: CheckTally,
    pub descent: CheckTally,
    pub fosp: CheckTally,
}

impl HorizonReport {
    pub fn all_passed(&self) -> bool {
        self.skipped.is_none()
            && [&self.mirror, &self.covariance, &self.descent, &self.fosp]
                .iter()
                .all(|c| c.all_passed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorTally {
    pub instances: usize,
    pub agree: usize,
    pub rate: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub seeds: Vec<u64>,
    pub group_counts: Vec<usize>,
    pub dims: Vec<usize>,
    pub horizons: Vec<HorizonReport>,
    /// The same checks on a problem with `grad R = 0` everywhere.
    pub flat_problem: Vec<HorizonReport>,
    pub taylor: TaylorTally,
}

/// Audits every `(seed, k, d)` sigmoid problem at each horizon.
pub fn audit_horizon(horizon: usize, seeds: &[u64], ks: &[usize], ds: &[usize]) -> HorizonReport {
    let cells: Vec<(u64, usize, usize)> = seeds
        .iter()
        .flat_map(|&s| {
            ks.iter()
                .flat_map(move |&k| ds.iter().map(move |&d| (s, k, d)))
        })
        .collect();
    let problems: Vec<(FailureSite, SigmoidProblem)> = cells
        .iter()
        .map(|&(seed, k, d)| {
            (
                FailureSite {
                    seed,
                    k,
                    d,
                    epoch: None,
                },
                SigmoidProblem::random(seed, k, d),
            )
        })
        .collect();
    audit_problems(horizon, &problems)
}

fn audit_problems(horizon: usize, problems: &[(FailureSite, SigmoidProblem)]) -> HorizonReport {
    let mut report = HorizonReport {
        horizon,
        skipped: None,
        problems: problems.len(),
        mirror: CheckTally::default(),
        covariance: CheckTally::default(),
        descent: CheckTally::default(),
        fosp: CheckTally::default(),
    };
    let outcomes: Vec<Result<[CheckTally; 4]>> = problems
        .par_iter()
        .map(|(site, problem)| {
            let constants = problem.certified_constants(horizon, 1e-2);
            let run = run_audit(problem, &constants)?;
            let mut t: [CheckTally; 4] = Default::default();
            let at = |epoch| FailureSite {
                epoch: Some(epoch),
                ..*site
            };
            for s in &run.steps {
                t[0].record(s.mirror.passed, s.mirror.margin(), || at(s.epoch));
                t[1].record(
                    s.covariance.passed,
                    s.covariance.after - s.covariance.before,
                    || at(s.epoch),
                );
                t[2].record(s.descent.passed, s.descent.margin(), || at(s.epoch));
            }
            t[3].record(
                run.fosp.passed,
                run.fosp.bound - run.fosp.avg_grad_sq,
                || *site,
            );
            Ok(t)
        })
        .collect();
    for outcome in outcomes {
        match outcome {
            Ok([m, c, d, f]) => {
                report.mirror.merge(m);
                report.covariance.merge(c);
                report.descent.merge(d);
                report.fosp.merge(f);
            }
            Err(e) => {
                report.skipped.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if report.skipped.is_some() {
        report.mirror = CheckTally::default();
        report.covariance = CheckTally::default();
        report.descent = CheckTally::default();
        report.fosp = CheckTally::default();
    }
    report
}

/// Taylor-versus-exact agreement over `instances` random problems.
pub fn taylor_agreement(instances: usize, eta: f64, seed: u64) -> Result<TaylorTally> {
    let picks = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let (params, split) =
                random_taylor_instance(seed.wrapping_mul(1_000_003).wrapping_add(i));
            taylor_selection_oracle(&params, &split, eta)
        })
        .collect::<Result<Vec<_>>>()?;
    let agree = picks.iter().filter(|p| p.agree).count();
    Ok(TaylorTally {
        instances,
        agree,
        rate: if instances == 0 {
            1.0
        } else {
            agree as f64 / instances as f64
        },
        eta,
    })
}

/// Full audit: sigmoid problems for every horizon, a flat problem, and the
/// Taylor oracle.
pub fn audit_suite(
    horizons: &[usize],
    seeds: &[u64],
    ks: &[usize],
    ds: &[usize],
) -> Result<AuditReport> {
    let flat = [(
        FailureSite {
            seed: 0,
            k: 3,
            d: 2,
            epoch: None,
        },
        SigmoidProblem::flat(3, 2),
    )];
    Ok(AuditReport {
        seeds: seeds.to_vec(),
        group_counts: ks.to_vec(),
        dims: ds.to_vec(),
        horizons: horizons
            .iter()
            .map(|&t| audit_horizon(t, seeds, ks, ds))
            .collect(),
        flat_problem: horizons.iter().map(|&t| audit_problems(t, &flat)).collect(),
        taylor: taylor_agreement(500, 1e-3, 0)?,
    })
}
