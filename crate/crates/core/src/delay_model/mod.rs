//! Fetch-latency models and the moments of the aggregate delay.
//!
//! The aggregate delay of a fetch episode is the miss latency `Z` plus the
//! remaining wait of every request for the same object that arrives while
//! the fetch is in flight. With Poisson arrivals at rate `lambda`:
//!
//! * constant latency `z`: `E[D] = z(1 + lambda z / 2)`, `Var(D) = lambda z^3 / 3`
//! * exponential latency with mean `z`:
//!   `E[D] = z + lambda z^2`, `Var(D) = z^2 + 6 lambda z^3 + 5 lambda^2 z^4`
//!
//! [`aggregate_delay_oracle`] samples episodes directly and is the
//! independent check on both formulas.

mod pdf;

pub use pdf::{
    conditional_pdf_given_k_z, default_k_max, irwin_hall_density, pdf_numeric, pdf_point_mass_term,
    NumericPdfMoments, PdfEval, PdfEvalConfig,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Distribution of the fetch latency `Z`, in ms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LatencyModel {
    /// `Z = mean` with probability one.
    Deterministic { mean: f64 },
    /// `Z ~ Exp(1 / mean)`.
    Exponential { mean: f64 },
}

impl LatencyModel {
    pub fn deterministic(mean: f64) -> Result<Self, ModelError> {
        check_latency(mean)?;
        Ok(LatencyModel::Deterministic { mean })
    }

    pub fn exponential(mean: f64) -> Result<Self, ModelError> {
        check_latency(mean)?;
        Ok(LatencyModel::Exponential { mean })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LatencyModel::Deterministic { mean } | LatencyModel::Exponential { mean } => mean,
        }
    }

    /// Rate `mu = 1 / z`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    pub fn name(&self) -> &'static str {
        match self {
            LatencyModel::Deterministic { .. } => "det",
            LatencyModel::Exponential { .. } => "exp",
        }
    }

    /// Closed-form aggregate-delay moments under Poisson arrivals at `lambda`.
    pub fn delay_moments(&self, lambda: f64) -> Result<DelayMoments, ModelError> {
        match *self {
            LatencyModel::Deterministic { mean } => moments_deterministic(lambda, mean),
            LatencyModel::Exponential { mean } => moments_exponential(lambda, mean),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_latency(self, rng)
    }
}

fn check_latency(z: f64) -> Result<(), ModelError> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveLatency(z))
    }
}

fn check_rate(lambda: f64) -> Result<(), ModelError> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NegativeRate(lambda))
    }
}

/// Mean (ms) and variance (ms^2) of the aggregate delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayMoments {
    pub mean: f64,
    pub variance: f64,
}

impl DelayMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Moments for a constant fetch latency `z`.
pub fn moments_deterministic(lambda: f64, z: f64) -> Result<DelayMoments, ModelError> {
    check_latency(z)?;
    check_rate(lambda)?;
    Ok(DelayMoments {
        mean: z * (1.0 + lambda * z / 2.0),
        variance: lambda * z.powi(3) / 3.0,
    })
}

/// Moments for an exponential fetch latency with mean `z`.
pub fn moments_exponential(lambda: f64, z: f64) -> Result<DelayMoments, ModelError> {
    check_latency(z)?;
    check_rate(lambda)?;
    let z2 = z * z;
    Ok(DelayMoments {
        mean: z + lambda * z2,
        variance: z2 + 6.0 * lambda * z2 * z + 5.0 * lambda * lambda * z2 * z2,
    })
}

/// Draws one fetch latency. The exponential case uses the inverse CDF
/// `-z ln(U)` with `U` uniform on `(0, 1]`.
pub fn sample_latency<R: Rng + ?Sized>(model: &LatencyModel, rng: &mut R) -> f64 {
    match *model {
        LatencyModel::Deterministic { mean } => mean,
        LatencyModel::Exponential { mean } => {
            let u = 1.0 - rng.random::<f64>();
            -mean * u.ln()
        }
    }
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Poisson::new only fails for non-positive or non-finite means
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// One aggregate-delay episode: draw `Z`, draw the number of arrivals in
/// `(0, Z]`, place them uniformly, and add up every request's wait.
pub fn sample_aggregate_delay<R: Rng + ?Sized>(
    lambda: f64,
    model: &LatencyModel,
    rng: &mut R,
) -> f64 {
    let z = sample_latency(model, rng);
    let k = poisson_count(lambda * z, rng);
    let mut d = z;
    for _ in 0..k {
        // arrival offset uniform on (0, z], remaining wait z - offset
        let offset = z * (1.0 - rng.random::<f64>());
        d += z - offset;
    }
    d
}

/// Empirical aggregate-delay moments with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub n_samples: u64,
    pub mean: f64,
    /// Unbiased (n - 1) sample variance.
    pub variance: f64,
    pub se_mean: f64,
    /// Standard error of the sample variance from the fourth central moment.
    pub se_variance: f64,
}

impl OracleEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n >= 1, "need at least one sample");
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let (m2, m4) = samples.iter().fold((0.0, 0.0), |(m2, m4), &x| {
            let d = x - mean;
            let d2 = d * d;
            (m2 + d2, m4 + d2 * d2)
        });
        if n == 1 {
            return OracleEstimate {
                n_samples: 1,
                mean,
                variance: 0.0,
                se_mean: 0.0,
                se_variance: 0.0,
            };
        }
        let variance = m2 / (nf - 1.0);
        let mu4 = m4 / nf;
        let var_of_var = ((mu4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf).max(0.0);
        OracleEstimate {
            n_samples: n as u64,
            mean,
            variance,
            se_mean: (variance / nf).sqrt(),
            se_variance: var_of_var.sqrt(),
        }
    }
}

const ORACLE_BLOCK: usize = 1 << 16;

/// Draws `n_samples` aggregate delays. Samples are produced in fixed-size
/// blocks, each from its own ChaCha stream of `seed`, so the result does not
/// depend on the thread count.
pub fn sample_aggregate_delays(
    lambda: f64,
    model: &LatencyModel,
    n_samples: usize,
    seed: u64,
) -> Vec<f64> {
    let blocks = n_samples.div_ceil(ORACLE_BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = ORACLE_BLOCK.min(n_samples - b * ORACLE_BLOCK);
            (0..len)
                .map(|_| sample_aggregate_delay(lambda, model, &mut rng))
                .collect()
        })
        .collect();
    chunks.concat()
}

/// Monte Carlo estimate of the aggregate-delay moments.
pub fn aggregate_delay_oracle(
    lambda: f64,
    model: &LatencyModel,
    n_samples: usize,
    seed: u64,
) -> Result<OracleEstimate, ModelError> {
    check_rate(lambda)?;
    if n_samples == 0 {
        return Err(ModelError::DegenerateInput(
            "n_samples must be at least 1".into(),
        ));
    }
    Ok(OracleEstimate::from_samples(&sample_aggregate_delays(
        lambda, model, n_samples, seed,
    )))
}

/// Outcome of comparing an oracle estimate against closed-form moments:
/// mean within `3 * se_mean`, variance within 5% relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub analytic: DelayMoments,
    pub empirical: OracleEstimate,
}

impl MomentCheck {
    pub const MEAN_SE_TOLERANCE: f64 = 3.0;
    pub const VARIANCE_REL_TOLERANCE: f64 = 0.05;

    pub fn mean_ok(&self) -> bool {
        let err = (self.empirical.mean - self.analytic.mean).abs();
        // degenerate distributions have se = 0 and must match exactly (up to rounding)
        err <= Self::MEAN_SE_TOLERANCE * self.empirical.se_mean + 1e-9 * self.analytic.mean
    }

    pub fn variance_ok(&self) -> bool {
        let err = (self.empirical.variance - self.analytic.variance).abs();
        if self.analytic.variance == 0.0 {
            err <= 1e-9 * self.analytic.mean * self.analytic.mean
        } else {
            err <= Self::VARIANCE_REL_TOLERANCE * self.analytic.variance
        }
    }

    pub fn passed(&self) -> bool {
        self.mean_ok() && self.variance_ok()
    }
}

/// Runs the oracle for one `(lambda, model)` point and pairs it with the
/// closed form.
pub fn check_moments(
    lambda: f64,
    model: &LatencyModel,
    n_samples: usize,
    seed: u64,
) -> Result<MomentCheck, ModelError> {
    Ok(MomentCheck {
        analytic: model.delay_moments(lambda)?,
        empirical: aggregate_delay_oracle(lambda, model, n_samples, seed)?,
    })
}
