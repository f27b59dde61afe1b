//! Request traces and the `time_ms,object_id,size_bytes` CSV format.
//!
//! Times are real-valued milliseconds. Equal timestamps are allowed and are
//! processed in trace order.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::TraceError;

pub const TRACE_CSV_HEADER: [&str; 3] = ["time_ms", "object_id", "size_bytes"];

/// Opaque object identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

impl From<u64> for ObjectId {
    fn from(v: u64) -> Self {
        ObjectId(v.to_string())
    }
}

/// One timestamped request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Arrival time in ms.
    pub time: f64,
    pub object: ObjectId,
    /// Object size in bytes.
    pub size: u64,
}

impl TraceEvent {
    pub fn new(time: f64, object: impl Into<ObjectId>, size: u64) -> Self {
        TraceEvent {
            time,
            object: object.into(),
            size,
        }
    }
}

/// A trace that is sorted by time and has one size per object.
///
/// Capacity is not part of this check; see [`validate_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(events: Vec<TraceEvent>) -> Result<Self, TraceError> {
        check_events(&events)?;
        Ok(Trace { events })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }

    pub fn max_size(&self) -> u64 {
        self.events.iter().map(|e| e.size).max().unwrap_or(0)
    }

    /// Sum of the sizes of all distinct objects.
    pub fn footprint(&self) -> u64 {
        let mut sizes: HashMap<&ObjectId, u64> = HashMap::new();
        for e in &self.events {
            sizes.insert(&e.object, e.size);
        }
        sizes.values().sum()
    }

    /// Checks the capacity constraint `max size < capacity`.
    pub fn check_capacity(&self, capacity: u64) -> Result<(), TraceError> {
        match self.events.iter().position(|e| e.size >= capacity) {
            None => Ok(()),
            Some(index) => {
                let e = &self.events[index];
                Err(TraceError::ObjectLargerThanCache {
                    index,
                    object: e.object.to_string(),
                    size: e.size,
                    capacity,
                })
            }
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TraceError> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let map_err = |e: csv::Error| TraceError::Io(e.to_string());
        wtr.write_record(TRACE_CSV_HEADER).map_err(map_err)?;
        for e in &self.events {
            wtr.write_record([e.time.to_string(), e.object.to_string(), e.size.to_string()])
                .map_err(map_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the trace CSV format. Line numbers in errors are 1-based and
    /// count the header as line 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| TraceError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.iter().map(str::trim).ne(TRACE_CSV_HEADER) {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("expected header {}", TRACE_CSV_HEADER.join(",")),
            });
        }
        let mut events = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| TraceError::Parse {
                line,
                message: e.to_string(),
            })?;
            if record.len() != 3 {
                return Err(TraceError::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let time: f64 = record[0].trim().parse().map_err(|_| TraceError::Parse {
                line,
                message: format!("invalid time_ms '{}'", &record[0]),
            })?;
            let object = record[1].trim();
            if object.is_empty() {
                return Err(TraceError::Parse {
                    line,
                    message: "empty object_id".into(),
                });
            }
            let size: u64 = record[2].trim().parse().map_err(|_| TraceError::Parse {
                line,
                message: format!("invalid size_bytes '{}'", &record[2]),
            })?;
            events.push(TraceEvent::new(time, object, size));
        }
        Trace::new(events)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

fn check_events(events: &[TraceEvent]) -> Result<(), TraceError> {
    let mut sizes: HashMap<&ObjectId, u64> = HashMap::new();
    let mut last_time = f64::NEG_INFINITY;
    for (index, e) in events.iter().enumerate() {
        if !e.time.is_finite() || e.time < 0.0 {
            return Err(TraceError::InvalidEvent {
                index,
                reason: format!("time {} is not a finite non-negative value", e.time),
            });
        }
        if e.size == 0 {
            return Err(TraceError::InvalidEvent {
                index,
                reason: "size must be positive".into(),
            });
        }
        if e.object.as_str().is_empty() {
            return Err(TraceError::InvalidEvent {
                index,
                reason: "empty object id".into(),
            });
        }
        if e.time < last_time {
            return Err(TraceError::UnsortedTrace { index });
        }
        last_time = e.time;
        match sizes.get(&e.object) {
            Some(&expected) if expected != e.size => {
                return Err(TraceError::InconsistentSize {
                    index,
                    object: e.object.to_string(),
                    expected,
                    found: e.size,
                })
            }
            Some(_) => {}
            None => {
                sizes.insert(&e.object, e.size);
            }
        }
    }
    Ok(())
}

/// Validates ordering, size consistency and the capacity bound.
pub fn validate_trace(events: Vec<TraceEvent>, capacity: u64) -> Result<Trace, TraceError> {
    let trace = Trace::new(events)?;
    trace.check_capacity(capacity)?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: f64, o: &str, s: u64) -> TraceEvent {
        TraceEvent::new(t, o, s)
    }

    #[test]
    fn accepts_well_formed_trace() {
        let t = validate_trace(vec![ev(1.0, "A", 10), ev(2.0, "B", 20)], 100).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.footprint(), 30);
    }

    #[test]
    fn rejects_unsorted() {
        let err = validate_trace(vec![ev(2.0, "A", 10), ev(1.0, "B", 20)], 100).unwrap_err();
        assert_eq!(err, TraceError::UnsortedTrace { index: 1 });
    }

    #[test]
    fn rejects_inconsistent_size() {
        let err = validate_trace(vec![ev(1.0, "A", 10), ev(2.0, "A", 11)], 100).unwrap_err();
        assert!(matches!(err, TraceError::InconsistentSize { index: 1, .. }));
    }

    #[test]
    fn rejects_object_not_smaller_than_cache() {
        let err = validate_trace(vec![ev(1.0, "A", 10), ev(2.0, "B", 100)], 100).unwrap_err();
        assert!(matches!(
            err,
            TraceError::ObjectLargerThanCache {
                index: 1,
                size: 100,
                ..
            }
        ));
    }

    #[test]
    fn equal_timestamps_are_allowed() {
        assert!(Trace::new(vec![ev(1.0, "A", 1), ev(1.0, "B", 1)]).is_ok());
    }

    #[test]
    fn rejects_zero_size_and_negative_time() {
        assert!(matches!(
            Trace::new(vec![ev(1.0, "A", 0)]),
            Err(TraceError::InvalidEvent { index: 0, .. })
        ));
        assert!(matches!(
            Trace::new(vec![ev(-1.0, "A", 1)]),
            Err(TraceError::InvalidEvent { index: 0, .. })
        ));
    }

    #[test]
    fn parse_error_reports_line() {
        let src = "time_ms,object_id,size_bytes\n1,A,10\n2,B,abc\n";
        let err = Trace::read_csv(src.as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 3, .. }), "{err:?}");
        let src = "time_ms,object_id,size_bytes\n1,A,abc\n";
        let err = Trace::read_csv(src.as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn rejects_wrong_header() {
        let err = Trace::read_csv("t,o,s\n1,A,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 1, .. }));
    }

    #[test]
    fn writes_lf_terminated_csv() {
        let t = Trace::new(vec![ev(1.0, "A", 10), ev(2.5, "B", 20)]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_ms,object_id,size_bytes\n1,A,10\n2.5,B,20\n"
        );
    }

    proptest! {
        #[test]
        fn csv_round_trip_and_revalidation(
            gaps in prop::collection::vec(0.0f64..1e4, 1..60),
            ids in prop::collection::vec(0u8..8, 60),
        ) {
            let mut t = 0.0;
            let events: Vec<_> = gaps
                .iter()
                .zip(&ids)
                .map(|(g, id)| {
                    t += g;
                    ev(t, &format!("obj{id}"), 1000 + *id as u64)
                })
                .collect();
            let trace = validate_trace(events, 10_000).unwrap();
            let again = validate_trace(trace.events().to_vec(), 10_000).unwrap();
            prop_assert_eq!(&again, &trace);

            let mut buf = Vec::new();
            trace.write_csv(&mut buf).unwrap();
            let back = Trace::read_csv(buf.as_slice()).unwrap();
            for (a, b) in back.events().iter().zip(trace.events()) {
                prop_assert_eq!(a.time.to_bits(), b.time.to_bits());
                prop_assert_eq!(&a.object, &b.object);
                prop_assert_eq!(a.size, b.size);
            }
        }
    }
}
