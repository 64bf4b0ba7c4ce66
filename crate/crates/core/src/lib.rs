//! Group-robust training by common-gradient reweighting.
//!
//! The crate trains linear classifiers on group-stratified data, weighting
//! each group's gradient by how much it helps every other group (CGD), and
//! ships the usual baselines (ERM, ERM-UW, Group-DRO and ablations). It also
//! contains seeded synthetic benchmarks, worst-group metrics, an experiment
//! runner, and an auditor that checks the step-by-step inequalities behind
//! the algorithm's convergence rate on problems with certified constants.

pub mod audit;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod model;
pub mod reweight;
pub mod runner;
pub mod simplex;
pub mod synth;
pub mod train;

pub use dataset::{GroupData, GroupDataset, Split, SplitKind};
pub use error::{CgdError, Result};
pub use metrics::{evaluate, solution_variance, EvalReport};
pub use model::{GradientBundle, ModelParams};
pub use reweight::{Rule, TrainerConfig};
pub use simplex::{LogWeights, SimplexWeights};
pub use synth::Setting;
pub use train::{run_training, sweep, RunTrace};
