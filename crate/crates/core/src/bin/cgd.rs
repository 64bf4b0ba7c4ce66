use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cgd::runner::{cmd_audit, cmd_gen, cmd_report, cmd_run, exit_code};
use cgd::synth::Setting;

#[derive(Parser)]
#[command(
    name = "cgd",
    version,
    about = "Group reweighting experiments and convergence audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Gen {
        /// noise_simple, rotation_simple or spurious_simple.
        setting: Setting,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Majority-to-minority size ratio (spurious_simple only).
        #[arg(long)]
        minority_ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's out_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check the convergence inequalities on random sigmoid problems.
    Audit {
        #[arg(long = "horizon", value_delimiter = ',', default_values_t = [100, 1000, 10000])]
        horizons: Vec<usize>,
        /// Number of problem seeds, starting from --seed.
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a results directory into summary.csv and SVG charts.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen {
            setting,
            seed,
            minority_ratio,
            out,
        } => cmd_gen(setting, seed, minority_ratio, &out).map(|d| {
            println!(
                "wrote {} ({} groups, {} train rows)",
                out.display(),
                d.k(),
                d.train.total()
            );
        }),
        Command::Run { config, out, jobs } => cmd_run(&config, out.as_deref(), jobs).map(|o| {
            let r = &o.results;
            println!("{} runs, {} failures", r.runs.len(), r.failures.len());
            for a in &r.aggregates {
                println!(
                    "{} {}: worst-group test loss {:.4}",
                    a.setting, a.rule, a.worst_loss_mean
                );
            }
        }),
        Command::Audit {
            horizons,
            seeds,
            seed,
            out,
            jobs,
        } => {
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            cmd_audit(&horizons, &seeds, &out, jobs).map(|r| {
                for h in &r.horizons {
                    match &h.skipped {
                        Some(reason) => println!("T={}: skipped ({reason})", h.horizon),
                        None => println!(
                            "T={}: mirror {}/{} covariance {}/{} descent {}/{} rate {}/{}",
                            h.horizon,
                            h.mirror.passed,
                            h.mirror.total,
                            h.covariance.passed,
                            h.covariance.total,
                            h.descent.passed,
                            h.descent.total,
                            h.fosp.passed,
                            h.fosp.total
                        ),
                    }
                }
                println!("taylor agreement {}/{}", r.taylor.agree, r.taylor.instances);
            })
        }
        Command::Report { out } => cmd_report(&out).map(|o| {
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} summary rows, {} charts", o.summary_rows, o.charts.len());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
