//! Closed-form aggregate-delay moments against a Monte Carlo oracle.
//!
//!     cargo run --release --example moments

use delayed_hits::delay_model::{check_moments, LatencyModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "{:>5} {:>5} {:>5} {:>10} {:>10} {:>12} {:>12}  ok",
        "model", "lambda", "z", "mean", "mc mean", "var", "mc var"
    );
    for (i, (lambda, z)) in [(0.1, 0.5), (1.0, 1.0), (5.0, 4.0)].into_iter().enumerate() {
        for model in [
            LatencyModel::deterministic(z)?,
            LatencyModel::exponential(z)?,
        ] {
            let c = check_moments(lambda, &model, 1_000_000, i as u64)?;
            println!(
                "{:>5} {:>5} {:>5} {:>10.4} {:>10.4} {:>12.4} {:>12.4}  {}",
                model.name(),
                lambda,
                z,
                c.analytic.mean,
                c.empirical.mean,
                c.analytic.variance,
                c.empirical.variance,
                c.passed()
            );
        }
    }
    Ok(())
}
