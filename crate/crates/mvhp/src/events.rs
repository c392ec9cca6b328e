//! Event streams: one sorted timestamp sequence per process.
//!
//! Times are in hours. Every stream must be strictly increasing and every
//! timestamp must lie within the observation window `[t_start, t_end]`.
//! Ties within a stream are resolved at ingestion; ties *across* streams are
//! legal (one multi-label source event lands in several streams with the
//! same timestamp) and all evaluation code treats them with the left-limit
//! convention.

use crate::error::{Error, Result};

/// A multivariate event record: per-process sorted timestamp lists plus the
/// observation window they were recorded on.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStreams {
    streams: Vec<Vec<f64>>,
    t_start: f64,
    t_end: f64,
}

impl EventStreams {
    /// Build streams over the window `[t_start, t_end]`, validating the
    /// invariants: `P >= 1`, strict within-stream ordering, all timestamps
    /// inside the window, and a positive-length window.
    pub fn new(streams: Vec<Vec<f64>>, t_start: f64, t_end: f64) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one process stream".into(),
            ));
        }
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidParameter(
                "observation window must be finite".into(),
            ));
        }
        if t_end <= t_start {
            return Err(Error::EmptyWindow);
        }
        for (p, stream) in streams.iter().enumerate() {
            let mut prev = f64::NEG_INFINITY;
            for (k, &t) in stream.iter().enumerate() {
                if !t.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "non-finite timestamp in process {p} at position {k}"
                    )));
                }
                if t <= prev {
                    return Err(Error::UnsortedStream {
                        process: p,
                        position: k,
                    });
                }
                if t < t_start || t > t_end {
                    return Err(Error::TimeOutsideWindow { t, t_start, t_end });
                }
                prev = t;
            }
        }
        Ok(Self {
            streams,
            t_start,
            t_end,
        })
    }

    /// Number of processes `P`.
    pub fn num_processes(&self) -> usize {
        self.streams.len()
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Window length in hours.
    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Timestamps of process `i`.
    pub fn events(&self, i: usize) -> Result<&[f64]> {
        self.streams
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::ProcessIndexOutOfRange {
                index: i,
                p: self.streams.len(),
            })
    }

    pub fn streams(&self) -> &[Vec<f64>] {
        &self.streams
    }

    pub fn counts(&self) -> Vec<usize> {
        self.streams.iter().map(Vec::len).collect()
    }

    pub fn total_events(&self) -> usize {
        self.streams.iter().map(Vec::len).sum()
    }

    /// All events merged in chronological order as `(time, process)` pairs.
    /// Equal timestamps are ordered by process index, which is the
    /// deterministic tie-break used everywhere in this crate.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut merged: Vec<(f64, usize)> = Vec::with_capacity(self.total_events());
        for (p, stream) in self.streams.iter().enumerate() {
            merged.extend(stream.iter().map(|&t| (t, p)));
        }
        merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        merged
    }

    /// Restrict to the half-open window `[t0, t1)` and shift the time origin
    /// to `t0`. The result spans `[0, t1 - t0]`. Used by the sliding-window
    /// pipeline, which discards pre-window history.
    pub fn restrict_shifted(&self, t0: f64, t1: f64) -> Result<EventStreams> {
        if t1 <= t0 {
            return Err(Error::ReversedInterval { t0, t1 });
        }
        let streams = self
            .streams
            .iter()
            .map(|stream| {
                stream
                    .iter()
                    .filter(|&&t| t >= t0 && t < t1)
                    .map(|&t| t - t0)
                    .collect()
            })
            .collect();
        EventStreams::new(streams, 0.0, t1 - t0)
    }
}
