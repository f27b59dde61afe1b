//! Sweeps omega and the estimator window and prints the improvement of the
//! stochastic policy over LRU at each point.
//!
//!     cargo run --release --example sensitivity_sweep

use clap::Parser;
use delayed_hits::cli::{run_sweep, Cli, Command, SweepAxis};
use delayed_hits::tracegen::{gen_synthetic, SyntheticSpec};

fn main() -> delayed_hits::error::Result<()> {
    let trace = gen_synthetic(&SyntheticSpec::default())?;
    // reuse the command-line defaults for everything not being swept
    let Command::Sweep(args) = Cli::parse_from(["dhsim", "sweep", "-", "--axis", "omega"]).command
    else {
        unreachable!()
    };
    for (axis, values) in [
        (SweepAxis::Omega, vec![0.0, 0.5, 1.0, 2.0]),
        (SweepAxis::Window, vec![1e3, 1e4, 1e5]),
    ] {
        let rows = run_sweep(&trace, axis, &values, &args.run, 2)?;
        for r in rows.iter().filter(|r| r.policy == "va-stoch") {
            println!(
                "{:<7} {:>8} rep {}  improvement {:+.4}",
                r.axis,
                r.axis_value,
                r.repetition,
                r.improvement_vs_lru.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
