//! Numerical density of the aggregate delay under exponential fetches.
//!
//!     cargo run --release --example pdf_density

use delayed_hits::delay_model::{pdf_numeric, LatencyModel, NumericPdfMoments, PdfEvalConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (lambda, mu) = (1.0, 1.0);
    let cfg = PdfEvalConfig::for_rates(lambda, mu);
    println!("lambda = {lambda}, mu = {mu}, k_max = {}", cfg.k_max);
    println!("{:>6} {:>12} {:>12}", "d", "density", "no-hit part");
    for d in [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0] {
        let p = pdf_numeric(lambda, mu, d, &cfg)?;
        println!("{d:>6} {:>12.6} {:>12.6}", p.density, p.point_mass);
    }

    let m = NumericPdfMoments::compute(lambda, mu, &cfg)?;
    let exact = LatencyModel::exponential(1.0 / mu)?.delay_moments(lambda)?;
    println!("mass     {:.6} (over [0, {:.1}])", m.mass, m.d_max);
    println!("mean     {:.6} closed form {}", m.mean, exact.mean);
    println!("variance {:.6} closed form {}", m.variance, exact.variance);
    Ok(())
}
