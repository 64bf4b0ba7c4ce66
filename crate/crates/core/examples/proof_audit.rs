//! Runs the raw weight update with the theorem's step sizes on one random
//! sum-of-sigmoids problem and prints the per-step inequality margins.
//!
//! `cargo run --release --example proof_audit -- [horizon] [seed]`

use cgd::audit::{run_audit, SigmoidProblem};

fn main() -> cgd::Result<()> {
    let mut args = std::env::args().skip(1);
    let horizon: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let problem = SigmoidProblem::random(seed, 3, 2);
    let constants = problem.certified_constants(horizon, 0.05);
    let run = run_audit(&problem, &constants)?;
    println!(
        "G = {:.4}, L = {:.4}, B = {}, T = {horizon}: eta = {:.4}, eta_alpha = {:.4}",
        constants.lipschitz,
        constants.smoothness,
        constants.bound,
        run.sizes.eta,
        run.sizes.eta_alpha
    );
    println!("epoch   KL(u, alpha)   mirror margin   covariance gain   descent margin");
    let stride = (horizon / 10).max(1);
    for s in run.steps.iter().filter(|s| s.epoch % stride == 0) {
        println!(
            "{:>5}   {:>12.3e}   {:>13.3e}   {:>15.3e}   {:>14.3e}",
            s.epoch,
            s.kl_to_uniform,
            s.mirror.margin(),
            s.covariance.after - s.covariance.before,
            s.descent.margin()
        );
    }
    let all = run.steps.iter().all(|s| s.passed());
    println!("all per-step inequalities hold: {all}");
    println!(
        "mean |grad R|^2 = {:.3e} <= {:.3e}: {} (min |grad R| = {:.3e})",
        run.fosp.avg_grad_sq, run.fosp.bound, run.fosp.passed, run.fosp.min_grad_norm
    );
    println!(
        "horizon needed for epsilon = {}: {}",
        constants.epsilon,
        constants.horizon_for_epsilon()
    );
    Ok(())
}
