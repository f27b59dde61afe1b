//! Event-driven delayed-hit cache simulation.
//!
//! A request for a resident object is a hit with zero latency. A request for
//! an object whose fetch is in flight is a delayed hit and waits for the
//! remaining fetch time. Any other request is a miss: it samples a fetch
//! latency, waits for all of it, and opens a fetch episode. Objects are
//! admitted (and victims evicted) when the fetch completes. A completion at
//! the same instant as a request is processed first.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::CacheConfig;
use crate::delay_model::sample_latency;
use crate::error::{Error, Result};
use crate::estimators::WindowState;
use crate::policies::{decide_admission, mad_update, Candidate, PolicyKind, RankInput};
use crate::trace::{ObjectId, Trace};

/// A fetch that has not completed yet.
#[derive(Debug, Clone, PartialEq)]
pub struct InFlightFetch {
    pub start: f64,
    /// `start` plus the sampled latency.
    pub completion: f64,
    /// Arrival times of the delayed hits, each in `(start, completion]`.
    pub queued: Vec<f64>,
}

/// Miss latency plus the remaining wait of every queued request.
pub fn episode_aggregate_delay(fetch: &InFlightFetch) -> f64 {
    (fetch.completion - fetch.start)
        + fetch
            .queued
            .iter()
            .map(|&t| fetch.completion - t)
            .sum::<f64>()
}

/// Relative latency reduction against LRU.
pub fn latency_improvement(latency_lru: f64, latency_a: f64) -> Result<f64> {
    if latency_lru == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok((latency_lru - latency_a) / latency_lru)
}

/// One completed fetch episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub object: ObjectId,
    pub start: f64,
    pub completion: f64,
    pub delayed_hits: u64,
    pub aggregate_delay: f64,
    /// Whether the object entered the cache at completion.
    pub admitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub config: CacheConfig,
    /// Sum of episode aggregate delays, ms.
    pub total_latency: f64,
    /// Sum of per-request latencies, ms. Equal to `total_latency` up to
    /// floating-point summation order.
    pub request_latency: f64,
    pub hits: u64,
    pub delayed_hits: u64,
    pub misses: u64,
    pub evictions: u64,
    /// Largest number of cached bytes at any point.
    pub peak_occupancy: u64,
    pub improvement_vs_lru: Option<f64>,
    pub episodes: Vec<Episode>,
}

impl SimReport {
    pub fn requests(&self) -> u64 {
        self.hits + self.delayed_hits + self.misses
    }

    /// CSV row in the `policy,seed,C_bytes,...` report format.
    pub fn row(&self) -> ReportRow {
        let c = &self.config;
        ReportRow {
            policy: self.policy.clone(),
            seed: c.seed,
            c_bytes: c.capacity,
            s: c.window_size,
            omega: c.omega,
            l_ms: c.latency.base_ms,
            c_ms_per_byte: c.latency.per_byte_ms,
            latency_model: c.latency.kind.name().to_owned(),
            total_latency_ms: self.total_latency,
            hits: self.hits,
            delayed_hits: self.delayed_hits,
            misses: self.misses,
            improvement_vs_lru: self.improvement_vs_lru,
        }
    }
}

/// Flat report record, one per simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub seed: u64,
    #[serde(rename = "C_bytes")]
    pub c_bytes: u64,
    #[serde(rename = "S")]
    pub s: usize,
    pub omega: f64,
    #[serde(rename = "L_ms")]
    pub l_ms: f64,
    pub c_ms_per_byte: f64,
    pub latency_model: String,
    pub total_latency_ms: f64,
    pub hits: u64,
    pub delayed_hits: u64,
    pub misses: u64,
    pub improvement_vs_lru: Option<f64>,
}

pub const REPORT_CSV_HEADER: &str = "policy,seed,C_bytes,S,omega,L_ms,c_ms_per_byte,latency_model,total_latency_ms,hits,delayed_hits,misses,improvement_vs_lru";

#[derive(Debug, Clone, Copy)]
struct Completion {
    time: f64,
    seq: u64,
    object: usize,
}

impl PartialEq for Completion {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Completion {}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Default)]
struct DelayHistory {
    count: u64,
    mean: f64,
    m2: f64,
}

impl DelayHistory {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn population_std(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0).sqrt()
        }
    }
}

struct ObjectState {
    size: u64,
    latency_mean: f64,
    resident: bool,
    fetch: Option<InFlightFetch>,
    ewma: Option<f64>,
    history: DelayHistory,
}

struct Simulator<'a> {
    config: &'a CacheConfig,
    names: Vec<ObjectId>,
    objects: Vec<ObjectState>,
    resident: Vec<usize>,
    used: u64,
    window: WindowState<usize>,
    completions: BinaryHeap<Reverse<Completion>>,
    completion_seq: u64,
    rng: ChaCha8Rng,
    report: SimReport,
}

/// Runs one policy over a trace.
pub fn simulate(trace: &Trace, config: &CacheConfig) -> Result<SimReport> {
    config.validate()?;
    trace.check_capacity(config.capacity)?;

    let mut index: HashMap<&ObjectId, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut objects = Vec::new();
    let mut keys = Vec::with_capacity(trace.len());
    for e in trace.events() {
        let next = names.len();
        let k = *index.entry(&e.object).or_insert(next);
        if k == next {
            names.push(e.object.clone());
            objects.push(ObjectState {
                size: e.size,
                latency_mean: config.latency.mean_for(e.size),
                resident: false,
                fetch: None,
                ewma: None,
                history: DelayHistory::default(),
            });
        }
        keys.push(k);
    }

    let mut sim = Simulator {
        config,
        names,
        objects,
        resident: Vec::new(),
        used: 0,
        window: WindowState::new(config.window_size),
        completions: BinaryHeap::new(),
        completion_seq: 0,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        report: SimReport {
            policy: config.policy.label().to_owned(),
            config: config.clone(),
            total_latency: 0.0,
            request_latency: 0.0,
            hits: 0,
            delayed_hits: 0,
            misses: 0,
            evictions: 0,
            peak_occupancy: 0,
            improvement_vs_lru: None,
            episodes: Vec::new(),
        },
    };

    for (e, &k) in trace.events().iter().zip(&keys) {
        sim.complete_until(e.time)?;
        sim.request(e.time, k)?;
    }
    sim.complete_until(f64::INFINITY)?;
    Ok(sim.report)
}

impl Simulator<'_> {
    fn complete_until(&mut self, t: f64) -> Result<()> {
        while let Some(Reverse(next)) = self.completions.peek().copied() {
            if next.time > t {
                break;
            }
            self.completions.pop();
            self.complete(next.time, next.object)?;
        }
        Ok(())
    }

    fn request(&mut self, t: f64, k: usize) -> Result<()> {
        self.window.record_arrival(t, k)?;
        let obj = &mut self.objects[k];
        if obj.resident {
            self.report.hits += 1;
        } else if let Some(fetch) = obj.fetch.as_mut() {
            let wait = (fetch.completion - t).max(0.0);
            fetch.queued.push(t);
            self.report.delayed_hits += 1;
            self.report.request_latency += wait;
        } else {
            let model = self.config.latency.model_for(obj.size)?;
            let z = sample_latency(&model, &mut self.rng);
            let completion = t + z;
            obj.fetch = Some(InFlightFetch {
                start: t,
                completion,
                queued: Vec::new(),
            });
            self.report.misses += 1;
            self.report.request_latency += completion - t;
            self.completions.push(Reverse(Completion {
                time: completion,
                seq: self.completion_seq,
                object: k,
            }));
            self.completion_seq += 1;
        }
        Ok(())
    }

    fn complete(&mut self, now: f64, k: usize) -> Result<()> {
        let fetch = self.objects[k]
            .fetch
            .take()
            .expect("completion scheduled for an in-flight object");
        let delay = episode_aggregate_delay(&fetch);
        self.report.total_latency += delay;
        {
            let obj = &mut self.objects[k];
            obj.ewma = Some(mad_update(obj.ewma, delay, self.config.policy.ewma_alpha()));
            obj.history.push(delay);
        }

        let cached: Vec<Candidate<usize>> = self
            .resident
            .iter()
            .map(|&r| self.candidate(r, now))
            .collect::<Result<_>>()?;
        let incoming = self.candidate(k, now)?;
        let free = self.config.capacity - self.used;
        let decision = decide_admission(&cached, &incoming, free, self.config.admission)?;
        for v in &decision.victims {
            self.objects[*v].resident = false;
            self.used -= self.objects[*v].size;
            self.report.evictions += 1;
        }
        if !decision.victims.is_empty() {
            let objects = &self.objects;
            self.resident.retain(|&r| objects[r].resident);
        }
        if decision.admit {
            self.objects[k].resident = true;
            self.used += self.objects[k].size;
            self.resident.push(k);
            self.report.peak_occupancy = self.report.peak_occupancy.max(self.used);
        }
        debug_assert!(self.used <= self.config.capacity);

        self.report.episodes.push(Episode {
            object: self.names[k].clone(),
            start: fetch.start,
            completion: fetch.completion,
            delayed_hits: fetch.queued.len() as u64,
            aggregate_delay: delay,
            admitted: decision.admit,
        });
        Ok(())
    }

    fn candidate(&self, k: usize, now: f64) -> Result<Candidate<usize>> {
        let obj = &self.objects[k];
        let stats = self.window.stats(&k).expect("requested object has stats");
        let policy = self.config.policy;
        let rank = if policy == PolicyKind::Lru {
            crate::policies::RankScore(0.0)
        } else {
            let input = RankInput {
                rate: self.window.estimate_rate(&k, now)?,
                latency_mean: obj.latency_mean,
                residual: self.window.estimate_residual(&k, now)?,
                size: obj.size,
                agg_delay_ewma: obj.ewma.unwrap_or(0.0),
                history_mean: obj.history.mean,
                history_std: obj.history.population_std(),
            };
            policy.score(&input, self.config.omega)?
        };
        Ok(Candidate {
            key: k,
            size: obj.size,
            rank,
            recency: stats.last_seq,
        })
    }
}

/// Runs several policies on the same trace and base configuration in
/// parallel. When LRU is among them, every report gets its improvement
/// over LRU.
pub fn simulate_policies(
    trace: &Trace,
    base: &CacheConfig,
    policies: &[PolicyKind],
) -> Result<Vec<SimReport>> {
    let mut reports = policies
        .par_iter()
        .map(|&policy| {
            let mut cfg = base.clone();
            cfg.policy = policy;
            simulate(trace, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    fill_improvements(&mut reports)?;
    Ok(reports)
}

/// Sets `improvement_vs_lru` on every report when an LRU report is present.
pub fn fill_improvements(reports: &mut [SimReport]) -> Result<()> {
    let lru = reports
        .iter()
        .find(|r| r.config.policy == PolicyKind::Lru)
        .map(|r| r.total_latency);
    if let Some(base) = lru {
        for r in reports.iter_mut() {
            r.improvement_vs_lru = Some(latency_improvement(base, r.total_latency)?);
        }
    }
    Ok(())
}
