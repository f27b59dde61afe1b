//! Synthetic workloads (Zipf popularity, Poisson or Pareto arrivals) and
//! trace characterization.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, Zipf};
use serde::{Deserialize, Serialize};

use crate::config::MB;
use crate::error::{Error, Result, TraceError};
use crate::trace::{ObjectId, Trace, TraceEvent};

pub const DEFAULT_PARETO_SHAPE: f64 = 1.5;

/// Global inter-arrival process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ArrivalProcess {
    /// Exponential gaps at `rate` requests per ms.
    Poisson { rate: f64 },
    /// Pareto gaps with the given shape and scale (ms).
    Pareto { shape: f64, scale: f64 },
}

impl ArrivalProcess {
    /// Pareto gaps whose mean matches a Poisson process at `rate`.
    pub fn pareto_matching_rate(shape: f64, rate: f64) -> Self {
        ArrivalProcess::Pareto {
            shape,
            scale: (shape - 1.0) / (shape * rate),
        }
    }

    pub fn mean_gap(&self) -> f64 {
        match *self {
            ArrivalProcess::Poisson { rate } => 1.0 / rate,
            ArrivalProcess::Pareto { shape, scale } => shape * scale / (shape - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_objects: usize,
    pub n_requests: usize,
    pub zipf_alpha: f64,
    pub arrival: ArrivalProcess,
    /// Inclusive size range in bytes.
    pub size_range: (u64, u64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_objects: 100,
            n_requests: 100_000,
            zipf_alpha: 1.0,
            arrival: ArrivalProcess::Poisson { rate: 1.0 },
            size_range: (MB, 100 * MB),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_objects == 0 || self.n_requests == 0 {
            return bad("object and request counts must be positive".into());
        }
        if !(self.zipf_alpha > 0.0 && self.zipf_alpha.is_finite()) {
            return bad(format!(
                "zipf exponent {} must be positive",
                self.zipf_alpha
            ));
        }
        let (lo, hi) = self.size_range;
        if lo == 0 || lo > hi {
            return bad(format!("invalid size range [{lo}, {hi}]"));
        }
        match self.arrival {
            ArrivalProcess::Poisson { rate } if !(rate > 0.0 && rate.is_finite()) => {
                bad(format!("Poisson rate {rate} must be positive"))
            }
            ArrivalProcess::Pareto { shape, scale } if !(shape > 1.0 && scale > 0.0) => bad(
                format!("Pareto needs shape > 1 and scale > 0, got {shape}, {scale}"),
            ),
            _ => Ok(()),
        }
    }
}

/// Generates a sorted trace. Object `i` (1-based popularity rank) is named
/// `"i"` and keeps one uniformly drawn size throughout.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.size_range;
    let sizes: Vec<u64> = (0..spec.n_objects)
        .map(|_| rng.random_range(lo..=hi))
        .collect();
    let names: Vec<ObjectId> = (1..=spec.n_objects as u64).map(ObjectId::from).collect();
    let zipf = Zipf::new(spec.n_objects as f64, spec.zipf_alpha)
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let pareto = match spec.arrival {
        ArrivalProcess::Pareto { shape, scale } => {
            Some(Pareto::new(scale, shape).map_err(|e| Error::InvalidSpec(e.to_string()))?)
        }
        ArrivalProcess::Poisson { .. } => None,
    };

    let mut t = 0.0;
    let mut events = Vec::with_capacity(spec.n_requests);
    for _ in 0..spec.n_requests {
        let gap = match (spec.arrival, &pareto) {
            (ArrivalProcess::Poisson { rate }, _) => -(1.0 - rng.random::<f64>()).ln() / rate,
            (_, Some(p)) => p.sample(&mut rng),
            _ => unreachable!("pareto sampler built for pareto arrivals"),
        };
        t += gap;
        let rank = (zipf.sample(&mut rng) as usize).clamp(1, spec.n_objects) - 1;
        events.push(TraceEvent {
            time: t,
            object: names[rank].clone(),
            size: sizes[rank],
        });
    }
    Ok(Trace::new(events)?)
}

/// One line of the characterization report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityRow {
    pub object_id: String,
    pub count: u64,
    /// Empty for objects requested once.
    pub mean_interarrival_ms: Option<f64>,
    pub size_bytes: u64,
}

/// Request counts and mean inter-arrival times, most popular first (ties by
/// first appearance).
pub fn empirical_popularity(trace: &Trace) -> Result<Vec<PopularityRow>> {
    if trace.is_empty() {
        return Err(TraceError::EmptyTrace.into());
    }
    struct Acc {
        first_seen: usize,
        count: u64,
        first: f64,
        last: f64,
        size: u64,
    }
    let mut acc: HashMap<&ObjectId, Acc> = HashMap::new();
    for (i, e) in trace.events().iter().enumerate() {
        acc.entry(&e.object)
            .and_modify(|a| {
                a.count += 1;
                a.last = e.time;
            })
            .or_insert(Acc {
                first_seen: i,
                count: 1,
                first: e.time,
                last: e.time,
                size: e.size,
            });
    }
    let mut rows: Vec<(usize, PopularityRow)> = acc
        .into_iter()
        .map(|(id, a)| {
            let mean_gap = (a.count > 1).then(|| (a.last - a.first) / (a.count - 1) as f64);
            (
                a.first_seen,
                PopularityRow {
                    object_id: id.to_string(),
                    count: a.count,
                    mean_interarrival_ms: mean_gap,
                    size_bytes: a.size,
                },
            )
        })
        .collect();
    rows.sort_by(|a, b| b.1.count.cmp(&a.1.count).then(a.0.cmp(&b.0)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_popularity_csv<W: Write>(rows: &[PopularityRow], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads and validates a trace CSV file.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    Trace::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(arrival: ArrivalProcess, n_objects: usize, alpha: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_objects,
            n_requests: 10_000,
            zipf_alpha: alpha,
            arrival,
            seed,
            ..Default::default()
        }
    }

    /// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
    fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    fn gaps(trace: &Trace) -> Vec<f64> {
        let ev = trace.events();
        let mut out = vec![ev[0].time];
        out.extend(ev.windows(2).map(|w| w[1].time - w[0].time));
        out
    }

    #[test]
    fn single_object_poisson_gaps_pass_ks() {
        let t = gen_synthetic(&small(ArrivalProcess::Poisson { rate: 1.0 }, 1, 1.0, 5)).unwrap();
        assert!(t.events().iter().all(|e| e.object.as_str() == "1"));
        let mut g = gaps(&t);
        let d = ks_statistic(&mut g, |x| 1.0 - (-x).exp());
        // alpha = 0.01 critical value
        assert!(d < 1.628 / (g.len() as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn single_object_pareto_gaps_pass_ks() {
        let arrival = ArrivalProcess::pareto_matching_rate(1.5, 1.0);
        let t = gen_synthetic(&small(arrival, 1, 1.0, 6)).unwrap();
        let ArrivalProcess::Pareto { shape, scale } = arrival else {
            unreachable!()
        };
        let mut g = gaps(&t);
        let d = ks_statistic(&mut g, |x| {
            if x < scale {
                0.0
            } else {
                1.0 - (scale / x).powf(shape)
            }
        });
        assert!(d < 1.628 / (g.len() as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn steep_zipf_concentrates_on_top_object() {
        let mut spec = small(ArrivalProcess::Poisson { rate: 1.0 }, 100, 10.0, 7);
        spec.n_requests = 100_000;
        let rows = empirical_popularity(&gen_synthetic(&spec).unwrap()).unwrap();
        assert_eq!(rows[0].object_id, "1");
        assert!(rows[0].count as f64 > 0.99 * 100_000.0, "{}", rows[0].count);
    }

    #[test]
    fn zipf_one_has_unit_log_log_slope() {
        let spec = SyntheticSpec {
            seed: 8,
            ..Default::default()
        };
        let rows = empirical_popularity(&gen_synthetic(&spec).unwrap()).unwrap();
        // least-squares slope of ln(count) on ln(rank)
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (((i + 1) as f64).ln(), (r.count as f64).ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope + 1.0).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn poisson_counts_have_unit_dispersion() {
        let spec = SyntheticSpec {
            seed: 9,
            ..Default::default()
        };
        let t = gen_synthetic(&spec).unwrap();
        let horizon = t.events().last().unwrap().time;
        let bins = 1000;
        let width = horizon / bins as f64;
        let mut counts = vec![0f64; bins];
        for e in t.events() {
            let b = ((e.time / width) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
        let mean = counts.iter().sum::<f64>() / bins as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (bins as f64 - 1.0);
        let ratio = var / mean;
        assert!((0.9..=1.1).contains(&ratio), "dispersion {ratio}");
    }

    #[test]
    fn pareto_gaps_have_heavier_tail() {
        let poisson =
            gen_synthetic(&small(ArrivalProcess::Poisson { rate: 1.0 }, 10, 1.0, 10)).unwrap();
        let pareto = gen_synthetic(&small(
            ArrivalProcess::pareto_matching_rate(1.5, 1.0),
            10,
            1.0,
            10,
        ))
        .unwrap();
        let q = |mut g: Vec<f64>, p: f64| {
            g.sort_by(f64::total_cmp);
            g[((g.len() as f64) * p) as usize]
        };
        assert!(q(gaps(&pareto), 0.999) > q(gaps(&poisson), 0.999));
        // matched mean
        let mean = |g: Vec<f64>| g.iter().sum::<f64>() / g.len() as f64;
        assert!((mean(gaps(&poisson)) - 1.0).abs() < 0.05);
    }

    #[test]
    fn sizes_are_fixed_per_object_and_in_range() {
        let spec = SyntheticSpec {
            n_requests: 20_000,
            seed: 11,
            ..Default::default()
        };
        let t = gen_synthetic(&spec).unwrap();
        let mut seen: HashMap<&ObjectId, u64> = HashMap::new();
        for e in t.events() {
            assert!((MB..=100 * MB).contains(&e.size));
            assert_eq!(*seen.entry(&e.object).or_insert(e.size), e.size);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            n_requests: 5_000,
            seed: 12,
            ..Default::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        gen_synthetic(&spec).unwrap().write_csv(&mut a).unwrap();
        gen_synthetic(&spec).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_specs() {
        let spec = SyntheticSpec {
            zipf_alpha: 0.0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(gen_synthetic(&spec), Err(Error::InvalidSpec(_))));
        let spec = SyntheticSpec {
            size_range: (10, 5),
            ..SyntheticSpec::default()
        };
        assert!(gen_synthetic(&spec).is_err());
        let spec = SyntheticSpec {
            arrival: ArrivalProcess::Pareto {
                shape: 1.0,
                scale: 1.0,
            },
            ..SyntheticSpec::default()
        };
        assert!(gen_synthetic(&spec).is_err());
    }

    #[test]
    fn popularity_examples() {
        let t = Trace::new(vec![
            TraceEvent::new(0.0, "A", 1),
            TraceEvent::new(2.0, "A", 1),
            TraceEvent::new(3.0, "B", 2),
            TraceEvent::new(4.0, "A", 1),
        ])
        .unwrap();
        let rows = empirical_popularity(&t).unwrap();
        assert_eq!(rows[0].object_id, "A");
        assert_eq!(rows[0].count, 3);
        assert_eq!(rows[0].mean_interarrival_ms, Some(2.0));
        assert_eq!(rows[1].count, 1);
        assert_eq!(rows[1].mean_interarrival_ms, None);
        assert!(matches!(
            empirical_popularity(&Trace::new(vec![]).unwrap()),
            Err(Error::Trace(TraceError::EmptyTrace))
        ));
    }

    #[test]
    fn popularity_csv_round_trips() {
        let t = gen_synthetic(&small(ArrivalProcess::Poisson { rate: 1.0 }, 20, 1.0, 13)).unwrap();
        let rows = empirical_popularity(&t).unwrap();
        let mut buf = Vec::new();
        write_popularity_csv(&rows, &mut buf).unwrap();
        assert!(buf.starts_with(b"object_id,count,mean_interarrival_ms,size_bytes\n"));
        let back: Vec<PopularityRow> = csv::Reader::from_reader(buf.as_slice())
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .unwrap();
        assert_eq!(back, rows);
    }
}
