//! Full-batch training loop with pluggable group weighting and
//! validation-based epoch selection.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{GroupDataset, Split};
use crate::error::{CgdError, Result};
use crate::metrics::worst_group_accuracy;
use crate::model::{group_bundle, ModelParams};
use crate::reweight::{
    erm_uw_weights, erm_weights, group_dro_hard_select, mixed_gradient, rule_payoffs,
    sqrt_gd_weights, Rule, TrainerConfig,
};
use crate::simplex::{norm, simplex_normalize, LogWeights, SimplexWeights};

/// One epoch: losses at `theta^{t-1}`, the weights `alpha^t` used for the
/// step, and the validation score of the resulting `theta^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub alpha: SimplexWeights,
    pub losses: Vec<f64>,
    pub adjusted_losses: Vec<f64>,
    /// `|sum_i alpha_i g_i|`.
    pub update_norm: f64,
    /// Group-average loss `(1/k) sum_i l_i`.
    pub macro_loss: f64,
    pub val_worst_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub per_epoch: Vec<EpochRecord>,
    pub final_params: ModelParams,
    pub selected_params: ModelParams,
    /// 1-based epoch with the best validation worst-group accuracy.
    pub selected_epoch: usize,
    pub config: TrainerConfig,
    pub seed: u64,
}

impl RunTrace {
    pub fn final_alpha(&self) -> &SimplexWeights {
        &self.per_epoch.last().expect("at least one epoch").alpha
    }

    pub fn selected_record(&self) -> &EpochRecord {
        &self.per_epoch[self.selected_epoch - 1]
    }

    /// Appends this run's rows to a trace CSV body (no header).
    pub fn write_csv_rows(&self, run_id: &str, out: &mut String) {
        for r in &self.per_epoch {
            for g in 0..r.alpha.len() {
                let _ = writeln!(
                    out,
                    "{run_id},{},{},{},{g},{},{},{},{},{}",
                    self.seed,
                    self.config.rule,
                    r.epoch,
                    fmt(r.alpha[g]),
                    fmt(r.losses[g]),
                    fmt(r.adjusted_losses[g]),
                    fmt(r.update_norm),
                    fmt(r.macro_loss),
                );
            }
        }
    }
}

pub const TRACE_CSV_HEADER: &str =
    "run_id,seed,rule,epoch,group,alpha,loss,adjusted_loss,update_norm,macro_loss";

fn fmt(v: f64) -> String {
    crate::dataset::format_f64(v)
}

/// Weight state carried across epochs.
enum WeightState {
    Static(SimplexWeights),
    Exponentiated(LogWeights),
    PerStep,
}

/// Runs the configured rule for `config.epochs` full-batch steps from
/// `theta = 0`, `alpha = uniform`.
pub fn run_training(dataset: &GroupDataset, config: &TrainerConfig) -> Result<RunTrace> {
    config.validate()?;
    let k = dataset.k();
    let counts = dataset.group_counts();
    if let Some(group) = counts.iter().position(|&n| n == 0) {
        return Err(CgdError::EmptyGroup { group });
    }
    let selection_split: &Split = if dataset.val.groups.iter().all(|g| !g.is_empty()) {
        &dataset.val
    } else {
        &dataset.train
    };

    let mut state = match config.rule {
        Rule::Erm => WeightState::Static(erm_weights(&counts)?),
        Rule::ErmUw => WeightState::Static(erm_uw_weights(&counts, config.adjustment_c)?),
        r if r.is_exponentiated() => WeightState::Exponentiated(LogWeights::zeros(k)),
        _ => WeightState::PerStep,
    };

    let mut params = ModelParams::zeros(dataset.feature_dim());
    let mut per_epoch = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        let bundle = group_bundle(&params, &dataset.train, config)?;
        if bundle.losses.iter().any(|l| !l.is_finite()) {
            return Err(CgdError::NonFiniteState { epoch });
        }
        let alpha = match &mut state {
            WeightState::Static(a) => a.clone(),
            WeightState::Exponentiated(logits) => {
                let payoffs =
                    rule_payoffs(config.rule, &bundle)?.expect("exponentiated rule has payoffs");
                *logits = logits
                    .step(&payoffs, config.eta_alpha)
                    .map_err(|_| CgdError::NonFiniteState { epoch })?;
                simplex_normalize(logits)
            }
            WeightState::PerStep => match config.rule {
                Rule::GroupDroHard => {
                    SimplexWeights::vertex(k, group_dro_hard_select(&bundle.adjusted_losses))
                }
                Rule::SqrtGd => sqrt_gd_weights(&bundle.adjusted_losses)?,
                other => unreachable!("{other} has static or exponentiated weights"),
            },
        };

        let step = mixed_gradient(&alpha, &bundle.grads);
        let theta: Vec<f64> = params
            .to_vector()
            .iter()
            .zip(&step)
            .map(|(t, s)| t - config.eta * s)
            .collect();
        params = ModelParams::from_vector(&theta);
        if !params.is_finite() {
            return Err(CgdError::NonFiniteState { epoch });
        }

        let val = worst_group_accuracy(&params, selection_split)?;
        if best.as_ref().is_none_or(|(b, _, _)| val > *b) {
            best = Some((val, epoch, params.clone()));
        }
        per_epoch.push(EpochRecord {
            epoch,
            alpha,
            macro_loss: bundle.losses.iter().sum::<f64>() / k as f64,
            losses: bundle.losses,
            adjusted_losses: bundle.adjusted_losses,
            update_norm: norm(&step),
            val_worst_accuracy: val,
        });
    }

    let (_, selected_epoch, selected_params) = best.expect("epochs >= 1");
    Ok(RunTrace {
        per_epoch,
        final_params: params,
        selected_params,
        selected_epoch,
        config: config.clone(),
        seed: config.seed,
    })
}

/// One (config, seed) cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub config_index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunTrace, String>,
}

/// Runs every config against a freshly generated dataset for every seed.
///
/// Results come back in `(config, seed)` input order regardless of `jobs`.
/// A failing run is recorded in its cell and does not abort the sweep.
pub fn sweep<F>(
    generate: F,
    configs: &[TrainerConfig],
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<SweepRun>>
where
    F: Fn(u64) -> Result<GroupDataset> + Sync,
{
    if configs.is_empty() {
        return Err(CgdError::InvalidConfig(
            "sweep needs at least one config".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(CgdError::InvalidConfig(
            "sweep needs at least one seed".into(),
        ));
    }
    let body = || {
        let datasets: Vec<std::result::Result<GroupDataset, String>> = seeds
            .par_iter()
            .map(|&s| generate(s).map_err(|e| e.to_string()))
            .collect();
        let cells: Vec<(usize, usize)> = (0..configs.len())
            .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
            .collect();
        cells
            .into_par_iter()
            .map(|(c, s)| {
                let seed = seeds[s];
                let config = TrainerConfig {
                    seed,
                    ..configs[c].clone()
                };
                let outcome = match &datasets[s] {
                    Ok(ds) => run_training(ds, &config).map_err(|e| e.to_string()),
                    Err(e) => Err(format!("dataset generation failed: {e}")),
                };
                SweepRun {
                    config_index: c,
                    seed,
                    outcome,
                }
            })
            .collect()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CgdError::InvalidConfig(format!("thread pool: {e}")))
            .map(|pool| pool.install(body)),
        None => Ok(body()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GroupData;
    use crate::model::bce_loss_and_grad;
    use crate::synth::{gen_noise_simple, Setting};

    fn small_dataset(k: usize) -> GroupDataset {
        let mut groups = Vec::new();
        for g in 0..k {
            let rows: Vec<(Vec<f64>, u8)> = (0..12)
                .map(|i| {
                    let x = vec![
                        (i as f64 - 5.5) / 3.0 + g as f64 * 0.1,
                        ((i * 7 + g) % 5) as f64 / 2.0 - 1.0,
                    ];
                    let y = u8::from(x[0] + 0.3 * x[1] > 0.1);
                    (x, y)
                })
                .collect();
            groups.push(GroupData::from_rows(2, &rows).unwrap());
        }
        let split = Split { groups };
        GroupDataset::new(2, split.clone(), split.clone(), split).unwrap()
    }

    #[test]
    fn erm_single_group_is_gradient_descent() {
        let ds = small_dataset(1);
        let cfg = TrainerConfig {
            rule: Rule::Erm,
            epochs: 25,
            ..TrainerConfig::default()
        };
        let trace = run_training(&ds, &cfg).unwrap();
        let mut theta = ModelParams::zeros(2);
        for _ in 0..25 {
            let (_, g) = bce_loss_and_grad(&theta, &ds.train.groups[0]).unwrap();
            let v: Vec<f64> = theta
                .to_vector()
                .iter()
                .zip(&g)
                .map(|(t, g)| t - 0.1 * g)
                .collect();
            theta = ModelParams::from_vector(&v);
        }
        assert_eq!(trace.final_params, theta);
    }

    #[test]
    fn frozen_weights_stay_uniform() {
        let ds = small_dataset(3);
        let cfg = TrainerConfig {
            eta_alpha: 0.0,
            epochs: 30,
            ..TrainerConfig::default()
        };
        let trace = run_training(&ds, &cfg).unwrap();
        for r in &trace.per_epoch {
            assert_eq!(r.alpha, SimplexWeights::uniform(3));
        }
    }

    #[test]
    fn trace_shape_and_simplex_invariant() {
        let ds = small_dataset(3);
        for rule in Rule::ALL {
            let cfg = TrainerConfig {
                rule,
                epochs: 40,
                eta_alpha: 1.0,
                adjustment_c: 0.5,
                ..TrainerConfig::default()
            };
            let trace = run_training(&ds, &cfg).unwrap();
            assert_eq!(trace.per_epoch.len(), 40);
            assert!((1..=40).contains(&trace.selected_epoch));
            for (i, r) in trace.per_epoch.iter().enumerate() {
                assert_eq!(r.epoch, i + 1);
                let s: f64 = r.alpha.as_slice().iter().sum();
                assert!((s - 1.0).abs() < 1e-9, "{rule}: alpha sums to {s}");
            }
            assert_eq!(
                trace.selected_record().val_worst_accuracy,
                trace
                    .per_epoch
                    .iter()
                    .map(|r| r.val_worst_accuracy)
                    .fold(0.0, f64::max)
            );
        }
    }

    #[test]
    fn first_epoch_losses_are_ln2() {
        let ds = gen_noise_simple(0).unwrap();
        let trace = run_training(
            &ds,
            &TrainerConfig {
                epochs: 1,
                ..Default::default()
            },
        )
        .unwrap();
        for l in &trace.per_epoch[0].losses {
            assert!((l - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn diverging_run_reports_epoch() {
        let ds = small_dataset(2);
        let cfg = TrainerConfig {
            rule: Rule::GroupDroEg,
            eta: 1e308,
            epochs: 5,
            weight_decay: 1e-3,
            ..TrainerConfig::default()
        };
        let out = run_training(&ds, &cfg);
        assert!(
            matches!(out, Err(CgdError::NonFiniteState { .. })),
            "{:?}",
            out.map(|t| t.final_params)
        );
    }

    #[test]
    fn sweep_shapes_and_determinism() {
        let cfg = TrainerConfig {
            epochs: 20,
            ..TrainerConfig::default()
        };
        let gen = |s| Setting::NoiseSimple.generate(s, None);
        let seeds: Vec<u64> = (0..6).collect();
        let runs = sweep(gen, std::slice::from_ref(&cfg), &seeds, Some(2)).unwrap();
        assert_eq!(runs.len(), 6);
        let finals: Vec<_> = runs
            .iter()
            .map(|r| r.outcome.as_ref().unwrap().final_params.clone())
            .collect();
        for i in 1..6 {
            assert_ne!(finals[0], finals[i]);
        }
        let again = sweep(gen, std::slice::from_ref(&cfg), &seeds, None).unwrap();
        for (a, b) in runs.iter().zip(&again) {
            assert_eq!(a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
        }
        assert!(sweep(gen, std::slice::from_ref(&cfg), &[], None).is_err());
        assert!(sweep(gen, &[], &seeds, None).is_err());
    }

    #[test]
    fn sweep_records_failures() {
        let gen = |s: u64| {
            if s == 1 {
                Err(CgdError::InvalidRatio(0.0))
            } else {
                Setting::RotationSimple.generate(s, None)
            }
        };
        let cfg = TrainerConfig {
            epochs: 3,
            ..TrainerConfig::default()
        };
        let runs = sweep(gen, &[cfg], &[0, 1, 2], None).unwrap();
        assert!(runs[0].outcome.is_ok());
        assert!(runs[1].outcome.is_err());
        assert!(runs[2].outcome.is_ok());
    }
}
