use delayed_hits::delay_model::{
    conditional_pdf_given_k_z, pdf_numeric, sample_aggregate_delays, LatencyModel, PdfEvalConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Histogram density estimate on `[d - h/2, d + h/2]` and its standard error.
fn bin_density(samples: impl Iterator<Item = f64>, d: f64, h: f64) -> (f64, f64) {
    let (mut n, mut inside) = (0u64, 0u64);
    for x in samples {
        n += 1;
        if (x - d).abs() < h / 2.0 {
            inside += 1;
        }
    }
    let p = inside as f64 / n as f64;
    (p / h, (p * (1.0 - p) / n as f64).sqrt() / h)
}

#[test]
fn conditional_density_k2_matches_histogram() {
    // Given k arrivals during a constant fetch z, each waits a uniform
    // residual on (0, z).
    let (k, z, d, h) = (2, 1.0, 2.0, 0.02);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples = (0..1_000_000).map(|_| z + (0..k).map(|_| z * rng.random::<f64>()).sum::<f64>());
    let (est, se) = bin_density(samples, d, h);
    let exact = conditional_pdf_given_k_z(k, z, d);
    assert!(
        (est - exact).abs() <= 3.0 * se,
        "{est} vs {exact} (se {se})"
    );
}

#[test]
fn numeric_pdf_matches_histogram_at_two() {
    let (lambda, mu, d, h) = (1.0, 1.0, 2.0, 0.04);
    let model = LatencyModel::exponential(1.0 / mu).unwrap();
    let samples = sample_aggregate_delays(lambda, &model, 10_000_000, 5);
    let (est, se) = bin_density(samples.into_iter(), d, h);
    let eval = pdf_numeric(lambda, mu, d, &PdfEvalConfig::for_rates(lambda, mu)).unwrap();
    assert!(!eval.truncation_warning());
    assert!(
        (est - eval.density).abs() <= 3.0 * se,
        "{est} vs {} (se {se})",
        eval.density
    );
}

#[test]
fn numeric_pdf_tracks_histogram_shape() {
    let (lambda, mu, h) = (0.5, 2.0, 0.05);
    let model = LatencyModel::exponential(1.0 / mu).unwrap();
    let samples = sample_aggregate_delays(lambda, &model, 2_000_000, 6);
    let cfg = PdfEvalConfig::for_rates(lambda, mu);
    for d in [0.1, 0.4, 0.8, 1.5, 2.5] {
        let (est, se) = bin_density(samples.iter().copied(), d, h);
        let exact = pdf_numeric(lambda, mu, d, &cfg).unwrap().density;
        // bin-averaging bias is second order in h; allow for it near d = 0
        let bias = 0.02 * exact;
        assert!(
            (est - exact).abs() <= 3.0 * se + bias,
            "d={d}: {est} vs {exact} (se {se})"
        );
    }
}
