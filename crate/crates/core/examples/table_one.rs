//! Reproduces the synthetic worst-group loss table: Group-DRO (EG) against
//! CGD on the three simple settings, six seeds, grid-selected step size.
//!
//! `cargo run --release --example table_one`

use cgd::reweight::Rule;
use cgd::runner::{run_experiment, ExperimentConfig, HyperGrid, TrainerDefaults};
use cgd::synth::Setting;

fn main() -> cgd::Result<()> {
    let config = ExperimentConfig {
        setting: None,
        settings: Setting::ALL.to_vec(),
        minority_ratio: None,
        rules: vec![Rule::GroupDroEg, Rule::Cgd],
        seeds: (0..6).collect(),
        grid: HyperGrid::default(),
        trainer: TrainerDefaults::default(),
        out_dir: None,
    };
    let out = run_experiment(&config, None)?;
    println!(
        "{:<16} {:<13} {:>10} {:>8} {:>10} {:>9}",
        "setting", "rule", "worst BCE", "std", "variance", "eta_a"
    );
    for a in &out.results.aggregates {
        let g = out
            .results
            .grid
            .iter()
            .find(|g| g.setting == a.setting && g.rule == a.rule)
            .unwrap();
        let eta_alpha = g.points[g.selected.unwrap()].point.eta_alpha;
        println!(
            "{:<16} {:<13} {:>10.4} {:>8.4} {:>10.4} {:>9}",
            a.setting.as_str(),
            a.rule.as_str(),
            a.worst_loss_mean,
            a.worst_loss_std.unwrap_or(f64::NAN),
            a.solution_variance.unwrap_or(f64::NAN),
            eta_alpha
        );
    }
    for a in &out.results.aggregates {
        let alphas: Vec<String> = out
            .results
            .runs_for(a.setting, a.rule)
            .map(|r| format!("{:.3?}", r.final_alpha))
            .collect();
        println!("{} {} final alpha: {}", a.setting, a.rule, alphas.join(" "));
    }
    Ok(())
}
