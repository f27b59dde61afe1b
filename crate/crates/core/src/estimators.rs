//! Online arrival-rate and residual-time estimates over a global window of
//! the `S` most recent requests.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use crate::error::EstimatorError;

/// Lower clamp for rate estimates, per ms.
pub const RATE_FLOOR: f64 = 1e-6;
/// Upper clamp for rate estimates, per ms.
pub const RATE_CEILING: f64 = 1e6;
/// Smallest residual time handed to the ranking functions, in ms.
pub const EPSILON_R: f64 = 1e-3;

/// Per-object arrival history.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectStats {
    /// Retained arrival times, ascending.
    pub arrivals: VecDeque<f64>,
    /// Time of the latest request; kept even after the arrivals are pruned.
    pub last_access: f64,
    /// Global request index of the latest request (LRU tie-breaker).
    pub last_seq: u64,
}

#[derive(Debug, Clone)]
pub struct WindowState<K = crate::trace::ObjectId> {
    window_size: usize,
    objects: HashMap<K, ObjectStats>,
    /// Owner of every retained arrival, oldest first.
    order: VecDeque<K>,
    requests: u64,
    last_time: f64,
}

impl<K: Hash + Eq + Clone> WindowState<K> {
    pub fn new(window_size: usize) -> Self {
        assert!(window_size >= 1, "window size must be at least 1");
        WindowState {
            window_size,
            objects: HashMap::new(),
            order: VecDeque::with_capacity(window_size + 1),
            requests: 0,
            last_time: f64::NEG_INFINITY,
        }
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    /// Number of arrivals currently retained across all objects.
    pub fn retained(&self) -> usize {
        self.order.len()
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }

    pub fn stats(&self, object: &K) -> Option<&ObjectStats> {
        self.objects.get(object)
    }

    pub fn record_arrival(&mut self, t: f64, object: K) -> Result<(), EstimatorError> {
        if t < self.last_time {
            return Err(EstimatorError::TimeRegression {
                time: t,
                last: self.last_time,
            });
        }
        self.last_time = t;
        let seq = self.requests;
        self.requests += 1;
        let stats = self
            .objects
            .entry(object.clone())
            .or_insert_with(|| ObjectStats {
                arrivals: VecDeque::new(),
                last_access: t,
                last_seq: seq,
            });
        stats.arrivals.push_back(t);
        stats.last_access = t;
        stats.last_seq = seq;
        self.order.push_back(object);
        while self.order.len() > self.window_size {
            let oldest = self.order.pop_front().expect("non-empty window");
            if let Some(s) = self.objects.get_mut(&oldest) {
                s.arrivals.pop_front();
            }
        }
        Ok(())
    }

    /// Inverse mean inter-arrival time of the retained arrivals.
    ///
    /// A single retained arrival falls back to `1 / (now - t)`, no retained
    /// arrivals to [`RATE_FLOOR`]. Results are clamped to
    /// `[RATE_FLOOR, RATE_CEILING]`.
    pub fn estimate_rate(&self, object: &K, now: f64) -> Result<f64, EstimatorError> {
        let stats = self
            .objects
            .get(object)
            .ok_or(EstimatorError::UnknownObject)?;
        let n = stats.arrivals.len();
        let raw = match n {
            0 => RATE_FLOOR,
            1 => 1.0 / (now - stats.arrivals[0]),
            _ => {
                let span = stats.arrivals[n - 1] - stats.arrivals[0];
                (n - 1) as f64 / span
            }
        };
        Ok(if raw.is_nan() {
            RATE_CEILING
        } else {
            raw.clamp(RATE_FLOOR, RATE_CEILING)
        })
    }

    /// Time since the last request, floored at [`EPSILON_R`].
    pub fn estimate_residual(&self, object: &K, now: f64) -> Result<f64, EstimatorError> {
        let stats = self
            .objects
            .get(object)
            .ok_or(EstimatorError::UnknownObject)?;
        Ok((now - stats.last_access).max(EPSILON_R))
    }
}
