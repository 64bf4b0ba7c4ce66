//! Trains every reweighting rule on one setting and reports test metrics at
//! the best validation epoch.
//!
//! `cargo run --release --example compare_rules -- [setting] [seed]`

use cgd::reweight::{Rule, TrainerConfig};
use cgd::synth::Setting;
use cgd::{evaluate, run_training};

fn main() -> cgd::Result<()> {
    let mut args = std::env::args().skip(1);
    let setting: Setting = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(Setting::SpuriousSimple);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let data = setting.generate(seed, None)?;
    println!("{setting}, seed {seed}");
    println!("rule            epoch  worst acc  avg acc  worst BCE  final alpha");
    for rule in Rule::ALL {
        let config = TrainerConfig {
            rule,
            seed,
            adjustment_c: if rule == Rule::ErmUw { 1.0 } else { 0.0 },
            ..TrainerConfig::default()
        };
        let trace = run_training(&data, &config)?;
        let test = evaluate(&trace.selected_params, &data.test)?;
        println!(
            "{:<15} {:>5}  {:>9.3}  {:>7.3}  {:>9.3}  {:.3?}",
            rule.as_str(),
            trace.selected_epoch,
            test.worst_group_accuracy,
            test.average_accuracy,
            test.worst_group_loss,
            trace.final_alpha().as_slice()
        );
    }
    Ok(())
}
