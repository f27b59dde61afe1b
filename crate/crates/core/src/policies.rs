//! Eviction ranking functions and victim selection.
//!
//! Every rank-based policy scores a cached object as
//! `(delay estimate) / (R * s)` where `R` is the estimated residual time and
//! `s` the size; the lowest score is evicted first. Ties fall back to LRU
//! order and then to the object key.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::delay_model::{moments_deterministic, moments_exponential};
use crate::error::{ModelError, PolicyError};

/// Retention priority; higher is kept longer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankScore(pub f64);

impl RankScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Eq for RankScore {}

impl PartialOrd for RankScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RankScore {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

pub const DEFAULT_CALA_WEIGHT: f64 = 0.5;
pub const DEFAULT_MAD_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyKind {
    Lru,
    /// Variance-aware rank with exponential-latency moments.
    StochasticVa,
    /// Variance-aware rank with constant-latency moments.
    DeterministicVa,
    /// Mean-only rank with constant-latency moments.
    Lac,
    /// Blend of the observed aggregate-delay average and the squared latency.
    Cala {
        weight: f64,
    },
    /// Exponentially weighted average of observed aggregate delays.
    Mad {
        alpha: f64,
    },
    /// Mean plus `omega` standard deviations of the object's observed
    /// episode delays, with no residual or size normalisation.
    HistoryVa,
}

impl PolicyKind {
    /// CLI selector.
    pub fn selector(&self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::StochasticVa => "va-stoch",
            PolicyKind::DeterministicVa => "va-det",
            PolicyKind::Lac => "lac",
            PolicyKind::Cala { .. } => "cala",
            PolicyKind::Mad { .. } => "mad",
            PolicyKind::HistoryVa => "hist-va",
        }
    }

    /// Name used in reports; reconstructed baselines carry a `-style` suffix.
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Lac => "lac-style",
            PolicyKind::Cala { .. } => "cala-style",
            PolicyKind::Mad { .. } => "mad-style",
            other => other.selector(),
        }
    }

    /// Parses a selector or report label, using the given baseline parameters.
    pub fn parse_with(name: &str, cala_weight: f64, mad_alpha: f64) -> Result<Self, PolicyError> {
        let kind = match name.trim() {
            "lru" => PolicyKind::Lru,
            "va-stoch" => PolicyKind::StochasticVa,
            "va-det" => PolicyKind::DeterministicVa,
            "lac" | "lac-style" => PolicyKind::Lac,
            "cala" | "cala-style" => PolicyKind::Cala {
                weight: cala_weight,
            },
            "mad" | "mad-style" => PolicyKind::Mad { alpha: mad_alpha },
            "hist-va" => PolicyKind::HistoryVa,
            other => return Err(PolicyError::UnknownPolicy(other.to_owned())),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            PolicyKind::Cala { weight } if !(0.0..=1.0).contains(&weight) => Err(
                ModelError::DegenerateInput(format!("CALA weight {weight} outside [0, 1]")).into(),
            ),
            PolicyKind::Mad { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(ModelError::DegenerateInput(format!("MAD alpha {alpha} outside (0, 1]")).into())
            }
            _ => Ok(()),
        }
    }

    /// Smoothing factor for the per-object aggregate-delay average.
    pub fn ewma_alpha(&self) -> f64 {
        match *self {
            PolicyKind::Mad { alpha } => alpha,
            _ => DEFAULT_MAD_ALPHA,
        }
    }

    /// Scores one object. LRU scores every object equally so the recency
    /// tie-break alone decides.
    pub fn score(&self, input: &RankInput, omega: f64) -> Result<RankScore, ModelError> {
        let RankInput {
            rate,
            latency_mean: z,
            residual,
            size,
            ..
        } = *input;
        match *self {
            PolicyKind::Lru => Ok(RankScore(0.0)),
            PolicyKind::StochasticVa => rank_stochastic(rate, z, omega, residual, size),
            PolicyKind::DeterministicVa => rank_deterministic_va(rate, z, omega, residual, size),
            PolicyKind::Lac => rank_lac(rate, z, residual, size),
            PolicyKind::Cala { weight } => {
                rank_cala(input.agg_delay_ewma, z, weight, residual, size)
            }
            PolicyKind::Mad { .. } => rank_mad(input.agg_delay_ewma, residual, size),
            PolicyKind::HistoryVa => Ok(RankScore(input.history_mean + omega * input.history_std)),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::parse_with(s, DEFAULT_CALA_WEIGHT, DEFAULT_MAD_ALPHA)
    }
}

/// Everything a policy may look at when scoring one object.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RankInput {
    /// Estimated arrival rate, per ms.
    pub rate: f64,
    /// Mean fetch latency `z`, ms.
    pub latency_mean: f64,
    /// Estimated residual time, ms.
    pub residual: f64,
    /// Size in bytes.
    pub size: u64,
    /// Smoothed observed aggregate delay, ms.
    pub agg_delay_ewma: f64,
    /// Mean of observed episode delays, ms.
    pub history_mean: f64,
    /// Population standard deviation of observed episode delays, ms.
    pub history_std: f64,
}

fn denominator(residual: f64, size: u64) -> Result<f64, ModelError> {
    if residual.is_nan() || residual <= 0.0 {
        return Err(ModelError::DegenerateInput(format!(
            "residual time must be positive, got {residual}"
        )));
    }
    if size == 0 {
        return Err(ModelError::DegenerateInput("size must be positive".into()));
    }
    Ok(residual * size as f64)
}

/// `[(z + lambda z^2) + omega sqrt(z^2 + 6 lambda z^3 + 5 lambda^2 z^4)] / (R s)`
pub fn rank_stochastic(
    lambda: f64,
    z: f64,
    omega: f64,
    residual: f64,
    size: u64,
) -> Result<RankScore, ModelError> {
    let den = denominator(residual, size)?;
    let m = moments_exponential(lambda, z)?;
    Ok(RankScore((m.mean + omega * m.std_dev()) / den))
}

/// `[z (1 + lambda z / 2) + omega sqrt(lambda z^3 / 3)] / (R s)`
pub fn rank_deterministic_va(
    lambda: f64,
    z: f64,
    omega: f64,
    residual: f64,
    size: u64,
) -> Result<RankScore, ModelError> {
    let den = denominator(residual, size)?;
    let m = moments_deterministic(lambda, z)?;
    Ok(RankScore((m.mean + omega * m.std_dev()) / den))
}

/// `z (1 + lambda z / 2) / (R s)`
pub fn rank_lac(lambda: f64, z: f64, residual: f64, size: u64) -> Result<RankScore, ModelError> {
    rank_deterministic_va(lambda, z, 0.0, residual, size)
}

/// `[weight * ewma + (1 - weight) * z^2 / 1ms] / (R s)`
pub fn rank_cala(
    agg_delay_ewma: f64,
    z: f64,
    weight: f64,
    residual: f64,
    size: u64,
) -> Result<RankScore, ModelError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(ModelError::DegenerateInput(format!(
            "CALA weight {weight} outside [0, 1]"
        )));
    }
    let den = denominator(residual, size)?;
    Ok(RankScore(
        (weight * agg_delay_ewma + (1.0 - weight) * z * z) / den,
    ))
}

/// `ewma / (R s)`
pub fn rank_mad(agg_delay_ewma: f64, residual: f64, size: u64) -> Result<RankScore, ModelError> {
    let den = denominator(residual, size)?;
    Ok(RankScore(agg_delay_ewma / den))
}

/// One EWMA step; an uninitialised average is `None` and takes the first
/// observation as is.
pub fn mad_update(ewma: Option<f64>, observed: f64, alpha: f64) -> f64 {
    match ewma {
        None => observed,
        Some(prev) => alpha * observed + (1.0 - alpha) * prev,
    }
}

/// A cached object (or the incoming one) as seen by victim selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<K> {
    pub key: K,
    pub size: u64,
    pub rank: RankScore,
    /// Larger is more recently used.
    pub recency: u64,
}

/// Eviction order: lowest rank, then least recently used, then key.
pub fn eviction_order<K: Ord>(a: &Candidate<K>, b: &Candidate<K>) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then(a.recency.cmp(&b.recency))
        .then_with(|| a.key.cmp(&b.key))
}

/// Shortest ascending-rank prefix of `cached` whose removal leaves at least
/// `incoming_size` bytes free.
pub fn choose_victims<K: Ord + Clone>(
    cached: &[Candidate<K>],
    free: u64,
    incoming_size: u64,
) -> Result<Vec<K>, PolicyError> {
    if free >= incoming_size {
        return Ok(Vec::new());
    }
    let mut order: Vec<&Candidate<K>> = cached.iter().collect();
    order.sort_by(|a, b| eviction_order(a, b));
    let mut freed = free;
    let mut victims = Vec::new();
    for c in order {
        victims.push(c.key.clone());
        freed += c.size;
        if freed >= incoming_size {
            return Ok(victims);
        }
    }
    Err(PolicyError::CannotFit {
        needed: incoming_size,
    })
}

/// How a newly fetched object enters the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdmissionMode {
    /// Always admit; victims come from the cached objects only.
    #[default]
    Always,
    /// The incoming object is ranked with the cached ones and is dropped if
    /// it would be evicted before enough space is freed.
    Compete,
}

impl AdmissionMode {
    pub fn name(&self) -> &'static str {
        match self {
            AdmissionMode::Always => "always",
            AdmissionMode::Compete => "compete",
        }
    }
}

impl FromStr for AdmissionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "always" => Ok(AdmissionMode::Always),
            "compete" => Ok(AdmissionMode::Compete),
            other => Err(format!(
                "unknown admission mode '{other}' (always | compete)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionDecision<K> {
    pub admit: bool,
    pub victims: Vec<K>,
}

pub fn decide_admission<K: Ord + Clone>(
    cached: &[Candidate<K>],
    incoming: &Candidate<K>,
    free: u64,
    mode: AdmissionMode,
) -> Result<AdmissionDecision<K>, PolicyError> {
    let victims = choose_victims(cached, free, incoming.size)?;
    if mode == AdmissionMode::Compete {
        let last_needed = victims
            .last()
            .and_then(|k| cached.iter().find(|c| &c.key == k));
        if let Some(last) = last_needed {
            if eviction_order(incoming, last) == Ordering::Less {
                return Ok(AdmissionDecision {
                    admit: false,
                    victims: Vec::new(),
                });
            }
        }
    }
    Ok(AdmissionDecision {
        admit: true,
        victims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn stochastic_rank_values() {
        let r = rank_stochastic(1.0, 1.0, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(r.0, 2.0 + 12f64.sqrt());
        assert_relative_eq!(r.0, 5.4641, epsilon = 1e-4);
        assert_relative_eq!(rank_stochastic(0.0, 1.0, 0.0, 2.0, 1).unwrap().0, 0.5);
        assert_relative_eq!(rank_stochastic(1.0, 1.0, 0.0, 1.0, 2).unwrap().0, 1.0);
    }

    #[test]
    fn deterministic_rank_values() {
        let r = rank_deterministic_va(1.0, 4.0, 1.0, 1.0, 1).unwrap();
        assert_relative_eq!(r.0, 12.0 + (64.0f64 / 3.0).sqrt());
        assert_relative_eq!(r.0, 16.6188, epsilon = 1e-4);
        assert_relative_eq!(rank_deterministic_va(0.0, 4.0, 5.0, 4.0, 1).unwrap().0, 1.0);
    }

    #[test]
    fn lac_rank_values() {
        assert_relative_eq!(rank_lac(1.0, 4.0, 1.0, 1).unwrap().0, 12.0);
        assert_relative_eq!(rank_lac(0.0, 4.0, 2.0, 2).unwrap().0, 1.0);
    }

    #[test]
    fn cala_rank_values() {
        assert_relative_eq!(rank_cala(10.0, 4.0, 1.0, 1.0, 1).unwrap().0, 10.0);
        assert_relative_eq!(rank_cala(10.0, 4.0, 0.0, 1.0, 1).unwrap().0, 16.0);
        assert_relative_eq!(rank_cala(10.0, 4.0, 0.5, 2.0, 1).unwrap().0, 6.5);
        assert!(rank_cala(10.0, 4.0, 1.5, 2.0, 1).is_err());
    }

    #[test]
    fn mad_updates() {
        assert_eq!(mad_update(None, 9.0, 1.0), 9.0);
        assert_eq!(mad_update(Some(9.0), 4.0, 0.5), 6.5);
        // toy episode: miss 4 plus delayed hits 3 and 2
        assert_eq!(mad_update(None, 4.0 + 3.0 + 2.0, 0.5), 9.0);
    }

    #[test]
    fn degenerate_denominators_are_rejected() {
        assert!(matches!(
            rank_stochastic(1.0, 1.0, 1.0, 0.0, 1),
            Err(ModelError::DegenerateInput(_))
        ));
        assert!(matches!(
            rank_stochastic(1.0, 1.0, 1.0, 1.0, 0),
            Err(ModelError::DegenerateInput(_))
        ));
        assert!(rank_mad(1.0, -1.0, 1).is_err());
    }

    #[test]
    fn parses_selectors() {
        for s in ["lru", "va-stoch", "va-det", "lac", "cala", "mad", "hist-va"] {
            let p: PolicyKind = s.parse().unwrap();
            assert_eq!(p.selector(), s);
            assert_eq!(p.label().parse::<PolicyKind>().unwrap(), p);
        }
        assert!(matches!(
            "lfu".parse::<PolicyKind>(),
            Err(PolicyError::UnknownPolicy(_))
        ));
        assert!(PolicyKind::parse_with("mad", 0.5, 0.0).is_err());
        assert!(PolicyKind::parse_with("cala", 2.0, 0.5).is_err());
    }

    fn cand(key: &str, size: u64, rank: f64, recency: u64) -> Candidate<String> {
        Candidate {
            key: key.into(),
            size,
            rank: RankScore(rank),
            recency,
        }
    }

    #[test]
    fn evicts_lowest_rank_first() {
        let cached = [cand("A", 10, 5.0, 1), cand("B", 10, 3.0, 2)];
        assert_eq!(choose_victims(&cached, 0, 10).unwrap(), vec!["B"]);
    }

    #[test]
    fn equal_ranks_evict_least_recent() {
        let cached = [cand("A", 10, 1.0, 7), cand("B", 10, 1.0, 3)];
        for _ in 0..3 {
            assert_eq!(choose_victims(&cached, 0, 10).unwrap(), vec!["B"]);
        }
    }

    #[test]
    fn no_victims_when_space_is_free() {
        let cached = [cand("A", 10, 1.0, 7)];
        assert!(choose_victims(&cached, 10, 10).unwrap().is_empty());
    }

    #[test]
    fn cannot_fit_is_reported() {
        let cached = [cand("A", 10, 1.0, 7)];
        assert_eq!(
            choose_victims(&cached, 0, 11),
            Err(PolicyError::CannotFit { needed: 11 })
        );
    }

    #[test]
    fn compete_mode_can_reject_incoming() {
        let cached = [cand("A", 10, 9.0, 3)];
        let weak = cand("B", 10, 4.0, 4);
        let strong = cand("B", 10, 10.0, 4);
        let d = decide_admission(&cached, &weak, 9, AdmissionMode::Compete).unwrap();
        assert!(!d.admit && d.victims.is_empty());
        let d = decide_admission(&cached, &strong, 9, AdmissionMode::Compete).unwrap();
        assert!(d.admit);
        assert_eq!(d.victims, vec!["A"]);
        let d = decide_admission(&cached, &weak, 9, AdmissionMode::Always).unwrap();
        assert!(d.admit);
        assert_eq!(d.victims, vec!["A"]);
        // fits without eviction: always admitted
        let d = decide_admission(&cached, &weak, 10, AdmissionMode::Compete).unwrap();
        assert!(d.admit && d.victims.is_empty());
    }

    #[test]
    fn stochastic_rank_dominates_deterministic() {
        for &l in &[0.0, 0.1, 1.0, 5.0] {
            for &z in &[0.5, 1.0, 4.0] {
                for &w in &[0.0, 0.5, 1.0, 2.0] {
                    let s = rank_stochastic(l, z, w, 1.0, 1).unwrap();
                    let d = rank_deterministic_va(l, z, w, 1.0, 1).unwrap();
                    assert!(d <= s, "{l} {z} {w}");
                    assert_eq!(
                        rank_lac(l, z, 1.0, 1).unwrap(),
                        rank_deterministic_va(l, z, 0.0, 1.0, 1).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn stochastic_rank_is_strictly_monotone() {
        let base = |l, z, w, r, s| rank_stochastic(l, z, w, r, s).unwrap().0;
        for &l in &[0.1, 1.0, 5.0] {
            for &z in &[0.5, 1.0, 4.0] {
                for &w in &[0.5, 1.0, 2.0] {
                    let f = base(l, z, w, 2.0, 10);
                    assert!(base(l * 1.5, z, w, 2.0, 10) > f);
                    assert!(base(l, z * 1.5, w, 2.0, 10) > f);
                    assert!(base(l, z, w * 1.5, 2.0, 10) > f);
                    assert!(base(l, z, w, 3.0, 10) < f);
                    assert!(base(l, z, w, 2.0, 11) < f);
                }
            }
        }
    }

    #[test]
    fn lru_policy_reduces_to_recency_order() {
        let input = RankInput {
            rate: 1.0,
            latency_mean: 1.0,
            residual: 1.0,
            size: 1,
            ..Default::default()
        };
        let score = PolicyKind::Lru.score(&input, 1.0).unwrap();
        let cached: Vec<_> = [(3u64, "A"), (1, "B"), (2, "C")]
            .iter()
            .map(|&(rec, k)| Candidate {
                key: k.to_string(),
                size: 1,
                rank: score,
                recency: rec,
            })
            .collect();
        assert_eq!(choose_victims(&cached, 0, 3).unwrap(), vec!["B", "C", "A"]);
    }

    proptest! {
        #[test]
        fn victim_list_is_minimal_and_scale_invariant(
            objs in prop::collection::vec((1u64..100, 0.0f64..10.0, 0.01f64..100.0, 0.0f64..5.0), 1..12),
            scale in 0.01f64..100.0,
            extra in 0u64..50,
        ) {
            let total: u64 = objs.iter().map(|o| o.0).sum();
            let incoming = (total / 2).max(1);
            let free = extra.min(incoming);
            let build = |rs: f64| -> Vec<Candidate<usize>> {
                objs.iter()
                    .enumerate()
                    .map(|(i, &(size, lambda, residual, z))| Candidate {
                        key: i,
                        size,
                        rank: rank_stochastic(lambda, z + 0.1, 1.0, residual * rs, size).unwrap(),
                        recency: i as u64,
                    })
                    .collect()
            };
            let a = build(1.0);
            let victims = choose_victims(&a, free, incoming).unwrap();
            let freed: u64 = victims.iter().map(|&k| a[k].size).sum();
            prop_assert!(free + freed >= incoming);
            if let Some((_, rest)) = victims.split_last() {
                let partial: u64 = rest.iter().map(|&k| a[k].size).sum();
                prop_assert!(free + partial < incoming);
            }
            let b = build(scale);
            prop_assert_eq!(choose_victims(&b, free, incoming).unwrap(), victims.clone());
            prop_assert_eq!(choose_victims(&a, free, incoming).unwrap(), victims);
        }
    }
}
