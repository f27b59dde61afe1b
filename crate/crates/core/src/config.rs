//! Simulation configuration and the size-dependent miss-latency model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::delay_model::{sample_latency, LatencyModel};
use crate::error::{Error, Result};
use crate::policies::{AdmissionMode, PolicyKind};

/// 1 MB in bytes.
pub const MB: u64 = 1_000_000;
/// 1 GB in bytes.
pub const GB: u64 = 1_000_000_000;

pub const DEFAULT_WINDOW: usize = 10_000;
pub const DEFAULT_OMEGA: f64 = 1.0;
pub const DEFAULT_BASE_LATENCY_MS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatencyKind {
    Deterministic,
    Exponential,
}

impl LatencyKind {
    pub fn name(&self) -> &'static str {
        match self {
            LatencyKind::Deterministic => "det",
            LatencyKind::Exponential => "exp",
        }
    }
}

impl std::str::FromStr for LatencyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "det" | "deterministic" => Ok(LatencyKind::Deterministic),
            "exp" | "exponential" => Ok(LatencyKind::Exponential),
            other => Err(format!("unknown latency model '{other}' (det | exp)")),
        }
    }
}

/// Miss latency with mean `base_ms + per_byte_ms * size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySpec {
    pub kind: LatencyKind,
    pub base_ms: f64,
    pub per_byte_ms: f64,
}

impl LatencySpec {
    /// Size component spanning `[0.01 L, L]` over 1..100 MB objects.
    pub fn default_per_byte(base_ms: f64) -> f64 {
        base_ms / (100.0 * MB as f64)
    }

    pub fn new(kind: LatencyKind, base_ms: f64) -> Self {
        LatencySpec {
            kind,
            base_ms,
            per_byte_ms: Self::default_per_byte(base_ms),
        }
    }

    pub fn with_per_byte(mut self, per_byte_ms: f64) -> Self {
        self.per_byte_ms = per_byte_ms;
        self
    }

    pub fn mean_for(&self, size: u64) -> f64 {
        self.base_ms + self.per_byte_ms * size as f64
    }

    pub fn model_for(&self, size: u64) -> Result<LatencyModel> {
        let z = self.mean_for(size);
        Ok(match self.kind {
            LatencyKind::Deterministic => LatencyModel::deterministic(z)?,
            LatencyKind::Exponential => LatencyModel::exponential(z)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_ms >= 0.0 && self.base_ms.is_finite()) {
            return Err(Error::Config(format!(
                "base latency {} must be >= 0",
                self.base_ms
            )));
        }
        if !(self.per_byte_ms >= 0.0 && self.per_byte_ms.is_finite()) {
            return Err(Error::Config(format!(
                "per-byte latency {} must be >= 0",
                self.per_byte_ms
            )));
        }
        Ok(())
    }
}

/// One miss latency draw: the mean is `base + per_byte * size`; the
/// stochastic mode samples an exponential with that mean.
pub fn miss_latency_for<R: Rng + ?Sized>(
    size: u64,
    base_ms: f64,
    per_byte_ms: f64,
    stochastic: bool,
    rng: &mut R,
) -> Result<f64> {
    let kind = if stochastic {
        LatencyKind::Exponential
    } else {
        LatencyKind::Deterministic
    };
    let spec = LatencySpec {
        kind,
        base_ms,
        per_byte_ms,
    };
    spec.validate()?;
    Ok(sample_latency(&spec.model_for(size)?, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// Capacity in bytes.
    pub capacity: u64,
    /// Estimator window, in requests.
    pub window_size: usize,
    pub omega: f64,
    pub policy: PolicyKind,
    pub latency: LatencySpec,
    pub seed: u64,
    pub admission: AdmissionMode,
}

impl CacheConfig {
    pub fn new(capacity: u64, policy: PolicyKind, latency: LatencySpec) -> Self {
        CacheConfig {
            capacity,
            window_size: DEFAULT_WINDOW,
            omega: DEFAULT_OMEGA,
            policy,
            latency,
            seed: 0,
            admission: AdmissionMode::Always,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::Config("capacity must be positive".into()));
        }
        if self.window_size == 0 {
            return Err(Error::Config("window size must be at least 1".into()));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("omega {} must be >= 0", self.omega)));
        }
        self.latency.validate()?;
        self.policy.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_model::OracleEstimate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_miss_latency() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            miss_latency_for(MB, 5.0, 0.0, false, &mut rng).unwrap(),
            5.0
        );
        let z = miss_latency_for(MB, 1.0, 1e-6, false, &mut rng).unwrap();
        assert!((z - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stochastic_miss_latency_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| miss_latency_for(MB, 5.0, 0.0, true, &mut rng).unwrap())
            .collect();
        let est = OracleEstimate::from_samples(&xs);
        // SE = 5 / 1000
        assert!((est.mean - 5.0).abs() <= 3.0 * 0.005, "{}", est.mean);
    }

    #[test]
    fn zero_latency_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(miss_latency_for(MB, 0.0, 0.0, false, &mut rng).is_err());
        assert!(miss_latency_for(MB, -1.0, 0.0, false, &mut rng).is_err());
    }

    #[test]
    fn default_per_byte_spans_the_synthetic_size_range() {
        let spec = LatencySpec::new(LatencyKind::Exponential, 5.0);
        assert!((spec.mean_for(MB) - 5.05).abs() < 1e-12);
        assert!((spec.mean_for(100 * MB) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let spec = LatencySpec::new(LatencyKind::Exponential, 5.0);
        let mut c = CacheConfig::new(100, PolicyKind::Lru, spec);
        assert!(c.validate().is_ok());
        c.omega = -1.0;
        assert!(c.validate().is_err());
        c.omega = 1.0;
        c.window_size = 0;
        assert!(c.validate().is_err());
    }
}
