//! Sliding-window rate and residual-time estimates for one object.
//!
//!     cargo run --example window_estimators

use delayed_hits::estimators::WindowState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut window = WindowState::<&str>::new(500);
    let mut t = 0.0;
    // "hot" arrives at 0.2/ms and "cold" at 0.02/ms
    for _ in 0..5_000 {
        let total: f64 = 0.22;
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        let obj = if rng.random::<f64>() < 0.2 / total {
            "hot"
        } else {
            "cold"
        };
        window.record_arrival(t, obj)?;
    }
    for obj in ["hot", "cold"] {
        println!(
            "{obj:<5} rate {:.4}/ms  residual {:.3} ms  retained {}",
            window.estimate_rate(&obj, t)?,
            window.estimate_residual(&obj, t)?,
            window.stats(&obj).map_or(0, |s| s.arrivals.len())
        );
    }
    println!(
        "window holds {} of {} requests",
        window.retained(),
        window.requests()
    );
    Ok(())
}
