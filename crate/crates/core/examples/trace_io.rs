//! Generates a trace, writes it as CSV, reads it back and prints the
//! popularity report.
//!
//!     cargo run --example trace_io

use delayed_hits::trace::Trace;
use delayed_hits::tracegen::{
    empirical_popularity, gen_synthetic, write_popularity_csv, SyntheticSpec,
};

fn main() -> delayed_hits::error::Result<()> {
    let trace = gen_synthetic(&SyntheticSpec {
        n_objects: 10,
        n_requests: 2_000,
        seed: 3,
        ..SyntheticSpec::default()
    })?;
    let path = std::env::temp_dir().join("delayed_hits_example_trace.csv");
    trace.save(&path)?;
    let loaded = Trace::load(&path)?;
    assert_eq!(loaded, trace);
    println!(
        "{} requests round-tripped through {}",
        loaded.len(),
        path.display()
    );

    let rows = empirical_popularity(&loaded)?;
    write_popularity_csv(&rows, std::io::stdout().lock())?;
    std::fs::remove_file(&path)?;
    Ok(())
}
