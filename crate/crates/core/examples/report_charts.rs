//! Runs a short experiment into a directory and renders the summary table and
//! weight charts from it, as `cgd run` followed by `cgd report` would.
//!
//! `cargo run --release --example report_charts -- [out_dir]`

use std::path::PathBuf;

use cgd::reweight::Rule;
use cgd::runner::{cmd_report, run_experiment, ExperimentConfig, HyperGrid, TrainerDefaults};
use cgd::synth::Setting;

fn main() -> cgd::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cgd_report"));
    let config = ExperimentConfig {
        setting: None,
        settings: Setting::ALL.to_vec(),
        minority_ratio: None,
        rules: vec![Rule::GroupDroEg, Rule::Cgd],
        seeds: vec![0, 1, 2],
        grid: HyperGrid {
            eta_alpha: vec![0.1],
            ..HyperGrid::default()
        },
        trainer: TrainerDefaults::default(),
        out_dir: None,
    };
    run_experiment(&config, None)?.write(&dir)?;
    let report = cmd_report(&dir)?;
    println!(
        "{} summary rows in {}",
        report.summary_rows,
        dir.join("summary.csv").display()
    );
    for chart in &report.charts {
        println!("chart: {}", chart.display());
    }
    Ok(())
}
