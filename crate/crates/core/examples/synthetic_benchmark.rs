//! All policies on the default synthetic workload: 100 objects, 100k
//! requests, Zipf(1) popularity, 500 MB cache, exponential fetches.
//!
//!     cargo run --release --example synthetic_benchmark [seed]

use delayed_hits::config::{CacheConfig, LatencyKind, LatencySpec, MB};
use delayed_hits::engine::simulate_policies;
use delayed_hits::policies::PolicyKind;
use delayed_hits::tracegen::{gen_synthetic, ArrivalProcess, SyntheticSpec, DEFAULT_PARETO_SHAPE};

fn main() -> delayed_hits::error::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let policies = [
        PolicyKind::Lru,
        PolicyKind::Lac,
        PolicyKind::Cala { weight: 0.5 },
        PolicyKind::Mad { alpha: 0.5 },
        PolicyKind::DeterministicVa,
        PolicyKind::StochasticVa,
    ];
    for arrival in [
        ArrivalProcess::Poisson { rate: 1.0 },
        ArrivalProcess::pareto_matching_rate(DEFAULT_PARETO_SHAPE, 1.0),
    ] {
        let trace = gen_synthetic(&SyntheticSpec {
            arrival,
            seed,
            ..SyntheticSpec::default()
        })?;
        let mut cfg = CacheConfig::new(
            500 * MB,
            PolicyKind::Lru,
            LatencySpec::new(LatencyKind::Exponential, 5.0),
        );
        cfg.seed = seed;
        println!("{arrival:?}");
        for r in simulate_policies(&trace, &cfg, &policies)? {
            println!(
                "  {:<10} total {:>10.0} ms  hits {:>6}  delayed {:>5}  misses {:>6}  vs lru {:+.3}",
                r.policy,
                r.total_latency,
                r.hits,
                r.delayed_hits,
                r.misses,
                r.improvement_vs_lru.unwrap_or(0.0)
            );
        }
    }
    Ok(())
}
