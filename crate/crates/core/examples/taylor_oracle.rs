//! Compares the first-order group choice with brute-force evaluation of every
//! candidate step, over random instances and a range of step sizes.
//!
//! `cargo run --release --example taylor_oracle`

use cgd::audit::taylor_agreement;

fn main() -> cgd::Result<()> {
    for eta in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
        let t = taylor_agreement(500, eta, 0)?;
        println!(
            "eta = {eta:>6}: {}/{} agree ({:.1}%)",
            t.agree,
            t.instances,
            100.0 * t.rate
        );
    }
    Ok(())
}
