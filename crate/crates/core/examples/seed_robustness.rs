//! Repeats the worst-group loss table over consecutive blocks of six seeds to
//! show how much the table moves with the seed choice.
//!
//! `cargo run --release --example seed_robustness -- 10`

use cgd::reweight::Rule;
use cgd::runner::{run_experiment, ExperimentConfig, HyperGrid, TrainerDefaults};
use cgd::synth::Setting;

fn main() -> cgd::Result<()> {
    let blocks: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(5);
    println!("block  setting          DRO worst  CGD worst  DRO var  CGD var");
    for b in 0..blocks {
        let config = ExperimentConfig {
            setting: None,
            settings: Setting::ALL.to_vec(),
            minority_ratio: None,
            rules: vec![Rule::GroupDroEg, Rule::Cgd],
            seeds: (6 * b..6 * b + 6).collect(),
            grid: HyperGrid::default(),
            trainer: TrainerDefaults::default(),
            out_dir: None,
        };
        let out = run_experiment(&config, None)?;
        for s in Setting::ALL {
            let dro = out.results.aggregate(s, Rule::GroupDroEg).expect("ran");
            let cgd = out.results.aggregate(s, Rule::Cgd).expect("ran");
            println!(
                "{b:>5}  {:<16} {:>9.4} {:>10.4} {:>8.4} {:>8.4}",
                s.as_str(),
                dro.worst_loss_mean,
                cgd.worst_loss_mean,
                dro.solution_variance.unwrap_or(f64::NAN),
                cgd.solution_variance.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
