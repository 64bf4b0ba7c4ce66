//! Worst-group test error of Group-DRO (EG) and CGD on the spurious setting as
//! the majority:minority ratio grows.
//!
//! `cargo run --release --example heterogeneity_sweep`

use cgd::reweight::Rule;
use cgd::runner::{run_experiment, ExperimentConfig, HyperGrid, TrainerDefaults};
use cgd::synth::{spurious_minority_size, Setting};

fn main() -> cgd::Result<()> {
    println!("    r  minority  DRO worst err  CGD worst err");
    for r in [2.0, 10.0, 100.0, 1000.0] {
        let config = ExperimentConfig {
            setting: Some(Setting::SpuriousSimple),
            settings: vec![],
            minority_ratio: Some(r),
            rules: vec![Rule::GroupDroEg, Rule::Cgd],
            seeds: vec![0, 1, 2],
            grid: HyperGrid::default(),
            trainer: TrainerDefaults::default(),
            out_dir: None,
        };
        let out = run_experiment(&config, None)?;
        let err = |rule| {
            1.0 - out
                .results
                .aggregate(Setting::SpuriousSimple, rule)
                .expect("ran")
                .worst_accuracy_mean
        };
        println!(
            "{r:>5}  {:>8}  {:>13.3}  {:>13.3}",
            spurious_minority_size(Some(r))?,
            err(Rule::GroupDroEg),
            err(Rule::Cgd)
        );
    }
    Ok(())
}
