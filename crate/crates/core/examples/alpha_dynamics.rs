//! Group weights over 400 epochs for Group-DRO (EG) and CGD on each simple
//! setting, at the default weight step size.
//!
//! `cargo run --release --example alpha_dynamics -- [seed]`

use cgd::reweight::{Rule, TrainerConfig};
use cgd::run_training;
use cgd::synth::Setting;

fn main() -> cgd::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(0);
    for setting in Setting::ALL {
        let data = setting.generate(seed, None)?;
        for rule in [Rule::GroupDroEg, Rule::Cgd] {
            let trace = run_training(
                &data,
                &TrainerConfig {
                    rule,
                    seed,
                    ..TrainerConfig::default()
                },
            )?;
            println!("{setting} / {rule}");
            for r in trace
                .per_epoch
                .iter()
                .filter(|r| r.epoch == 1 || r.epoch % 50 == 0)
            {
                let alpha: Vec<String> = r
                    .alpha
                    .as_slice()
                    .iter()
                    .map(|a| format!("{a:.3}"))
                    .collect();
                let losses: Vec<String> = r.losses.iter().map(|l| format!("{l:.3}")).collect();
                println!(
                    "  epoch {:>3}  alpha [{}]  train loss [{}]",
                    r.epoch,
                    alpha.join(", "),
                    losses.join(", ")
                );
            }
        }
    }
    Ok(())
}
