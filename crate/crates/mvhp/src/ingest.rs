//! Parsing raw labeled event data into event streams.
//!
//! Three input formats are supported:
//!
//! * labeled CSV with header `timestamp,labels,stance`, where `labels` is a
//!   `;`-separated list of narrative names;
//! * JSON lines with the same fields (`labels` as an array or `;`-string);
//! * the canonical export format, CSV with header
//!   `timestamp_hours,narrative`, one label per row.
//!
//! Timestamps may be ISO-8601 strings or numbers (epoch seconds by default).
//! Multi-label events are duplicated into every labeled stream. Narratives
//! below a minimum event count are dropped and reported. Because the model
//! math requires strictly increasing timestamps per stream (left limits),
//! events sharing an exact (timestamp, narrative) pair are deterministically
//! offset by multiples of 1e-7 hours in input order; the jitter is
//! disable-able, in which case duplicates are an error.

use crate::error::{Error, Result};
use crate::events::EventStreams;
use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Spacing inserted between colliding timestamps, in hours (0.36 ms).
const JITTER_HOURS: f64 = 1e-7;

/// One parsed input record, time already normalized to hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub time_hours: f64,
    pub labels: Vec<String>,
    pub stance: Option<String>,
}

/// Interpretation of bare numeric timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    Hours,
}

/// Input format; `None` in the config means detect from the file head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestFormat {
    /// `timestamp,labels,stance` CSV.
    Csv,
    /// JSON lines with the same fields.
    Jsonl,
    /// `timestamp_hours,narrative` CSV.
    Canonical,
}

/// Ingest controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Keep only narratives carrying at least this many events.
    pub min_events: usize,
    /// Keep only rows whose stance tag equals this value.
    pub stance_filter: Option<String>,
    /// Unit of bare numeric timestamps (canonical files are always hours).
    pub numeric_unit: TimeUnit,
    /// Analysis span in absolute hours on the ingest time axis; events
    /// outside are dropped. Defaults to the hull of the parsed events.
    pub span_override: Option<[f64; 2]>,
    /// Deterministic micro-offsets for colliding timestamps.
    pub jitter: bool,
    /// Abort on the first malformed row instead of skipping and reporting.
    pub fail_fast: bool,
    pub format: Option<IngestFormat>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            min_events: 100_000,
            stance_filter: None,
            numeric_unit: TimeUnit::Seconds,
            span_override: None,
            jitter: true,
            fail_fast: false,
            format: None,
        }
    }
}

/// A skipped input row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedRow {
    pub line: usize,
    pub message: String,
}

/// What happened during an ingest run; serializes to JSON for audit trails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub format: IngestFormat,
    /// Data rows encountered (header excluded).
    pub total_rows: usize,
    pub parsed_rows: usize,
    pub malformed: Vec<MalformedRow>,
    pub stance_filtered: usize,
    pub outside_span: usize,
    /// Events per narrative before thresholding, sorted by name.
    pub narrative_counts: Vec<(String, usize)>,
    pub dropped_narratives: Vec<(String, usize)>,
    /// Retained narratives in index order (lexicographic).
    pub labels: Vec<String>,
    pub events_per_stream: Vec<usize>,
    pub jittered_events: usize,
    /// Absolute span the streams were shifted from; stream times are hours
    /// since `span_hours[0]`.
    pub span_hours: [f64; 2],
}

fn parse_timestamp_hours(raw: &str, unit: TimeUnit) -> Result<f64> {
    let raw = raw.trim();
    if let Ok(value) = raw.parse::<f64>() {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite timestamp {raw}"
            )));
        }
        return Ok(match unit {
            TimeUnit::Seconds => value / 3600.0,
            TimeUnit::Hours => value,
        });
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Ok(dt.timestamp_millis() as f64 / 3_600_000.0);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(naive.and_utc().timestamp_millis() as f64 / 3_600_000.0);
        }
    }
    Err(Error::InvalidParameter(format!(
        "unparseable timestamp {raw:?}"
    )))
}

fn split_labels(raw: &str) -> Result<Vec<String>> {
    let labels: Vec<String> = raw
        .split(';')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if labels.is_empty() {
        return Err(Error::InvalidParameter("empty label list".into()));
    }
    Ok(labels)
}

fn normalize_stance(raw: Option<&str>) -> Option<String> {
    match raw.map(str::trim) {
        None | Some("") => None,
        Some(s) => Some(s.to_string()),
    }
}

fn detect_format(content: &str) -> Result<IngestFormat> {
    let first = content
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    if first.starts_with("timestamp_hours") {
        Ok(IngestFormat::Canonical)
    } else if first.starts_with("timestamp") {
        Ok(IngestFormat::Csv)
    } else if first.starts_with('{') {
        Ok(IngestFormat::Jsonl)
    } else {
        Err(Error::UnknownFormat(format!(
            "cannot detect input format from first line {first:?}"
        )))
    }
}

struct ParsedFile {
    rows: Vec<(usize, RawEvent)>, // (line number, event)
    malformed: Vec<MalformedRow>,
    total_rows: usize,
}

fn fail_or_record(
    malformed: &mut Vec<MalformedRow>,
    fail_fast: bool,
    line: usize,
    message: String,
) -> Result<()> {
    if fail_fast {
        return Err(Error::MalformedRow { line, message });
    }
    malformed.push(MalformedRow { line, message });
    Ok(())
}

fn parse_csv(content: &str, config: &IngestConfig, canonical: bool) -> Result<ParsedFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected: &[&str] = if canonical {
        &["timestamp_hours", "narrative"]
    } else {
        &["timestamp", "labels", "stance"]
    };
    let names: Vec<&str> = headers.iter().collect();
    if names != expected {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header {expected:?}, found {names:?}"),
        });
    }

    let mut out = ParsedFile {
        rows: Vec::new(),
        malformed: Vec::new(),
        total_rows: 0,
    };
    for record in reader.records() {
        out.total_rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line() as usize)
                    .unwrap_or(out.total_rows + 1);
                fail_or_record(&mut out.malformed, config.fail_fast, line, e.to_string())?;
                continue;
            }
        };
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(out.total_rows + 1);
        let parsed = if canonical {
            parse_timestamp_hours(&record[0], TimeUnit::Hours).and_then(|t| {
                Ok(RawEvent {
                    time_hours: t,
                    labels: split_labels(&record[1])?,
                    stance: None,
                })
            })
        } else {
            parse_timestamp_hours(&record[0], config.numeric_unit).and_then(|t| {
                Ok(RawEvent {
                    time_hours: t,
                    labels: split_labels(&record[1])?,
                    stance: normalize_stance(record.get(2)),
                })
            })
        };
        match parsed {
            Ok(event) => out.rows.push((line, event)),
            Err(e) => fail_or_record(&mut out.malformed, config.fail_fast, line, e.to_string())?,
        }
    }
    Ok(out)
}

fn parse_jsonl(content: &str, config: &IngestConfig) -> Result<ParsedFile> {
    let mut out = ParsedFile {
        rows: Vec::new(),
        malformed: Vec::new(),
        total_rows: 0,
    };
    for (idx, raw_line) in content.lines().enumerate() {
        let line = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        out.total_rows += 1;
        let parsed = parse_jsonl_row(raw_line, config.numeric_unit);
        match parsed {
            Ok(event) => out.rows.push((line, event)),
            Err(e) => fail_or_record(&mut out.malformed, config.fail_fast, line, e.to_string())?,
        }
    }
    Ok(out)
}

fn parse_jsonl_row(raw: &str, unit: TimeUnit) -> Result<RawEvent> {
    let value: serde_json::Value = serde_json::from_str(raw)?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidParameter("row is not a JSON object".into()))?;
    let time_hours = match obj.get("timestamp") {
        Some(serde_json::Value::String(s)) => parse_timestamp_hours(s, unit)?,
        Some(serde_json::Value::Number(n)) => parse_timestamp_hours(&n.to_string(), unit)?,
        _ => return Err(Error::InvalidParameter("missing timestamp".into())),
    };
    let labels = match obj.get("labels") {
        Some(serde_json::Value::Array(items)) => {
            let mut labels = Vec::with_capacity(items.len());
            for item in items {
                match item.as_str() {
                    Some(s) if !s.trim().is_empty() => labels.push(s.trim().to_string()),
                    _ => {
                        return Err(Error::InvalidParameter(
                            "labels must be non-empty strings".into(),
                        ))
                    }
                }
            }
            if labels.is_empty() {
                return Err(Error::InvalidParameter("empty label list".into()));
            }
            labels
        }
        Some(serde_json::Value::String(s)) => split_labels(s)?,
        _ => return Err(Error::InvalidParameter("missing labels".into())),
    };
    let stance = match obj.get("stance") {
        Some(serde_json::Value::String(s)) => normalize_stance(Some(s)),
        Some(serde_json::Value::Null) | None => None,
        Some(other) => {
            return Err(Error::InvalidParameter(format!(
                "stance must be a string, got {other}"
            )))
        }
    };
    Ok(RawEvent {
        time_hours,
        labels,
        stance,
    })
}

/// Parse a file into event streams plus the narrative-label index and a
/// run summary. Stream times are hours from the span origin.
pub fn ingest(
    path: &Path,
    config: &IngestConfig,
) -> Result<(EventStreams, Vec<String>, IngestSummary)> {
    let content = fs::read_to_string(path)?;
    let format = match config.format {
        Some(f) => f,
        None => detect_format(&content)?,
    };
    let mut parsed = match format {
        IngestFormat::Csv => parse_csv(&content, config, false)?,
        IngestFormat::Canonical => parse_csv(&content, config, true)?,
        IngestFormat::Jsonl => parse_jsonl(&content, config)?,
    };
    let parsed_rows = parsed.rows.len();

    // Stance pre-filter.
    let mut stance_filtered = 0;
    if let Some(stance) = &config.stance_filter {
        parsed.rows.retain(|(_, event)| {
            let keep = event.stance.as_deref() == Some(stance.as_str());
            if !keep {
                stance_filtered += 1;
            }
            keep
        });
    }

    // Count per narrative (an event with duplicate labels counts once per
    // distinct label).
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (_, event) in &parsed.rows {
        let mut seen: Vec<&str> = Vec::with_capacity(event.labels.len());
        for label in &event.labels {
            if !seen.contains(&label.as_str()) {
                seen.push(label);
                *counts.entry(label.clone()).or_insert(0) += 1;
            }
        }
    }
    let narrative_counts: Vec<(String, usize)> =
        counts.iter().map(|(k, &v)| (k.clone(), v)).collect();
    let labels: Vec<String> = counts
        .iter()
        .filter(|(_, &n)| n >= config.min_events)
        .map(|(k, _)| k.clone())
        .collect();
    let dropped_narratives: Vec<(String, usize)> = counts
        .iter()
        .filter(|(_, &n)| n < config.min_events)
        .map(|(k, &v)| (k.clone(), v))
        .collect();
    if labels.is_empty() {
        return Err(Error::EmptyIngest);
    }
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    // Span: configured override or the hull of the parsed events.
    let mut outside_span = 0;
    let span = match config.span_override {
        Some([lo, hi]) => {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(Error::InvalidParameter(format!(
                    "span override [{lo}, {hi}] is not increasing"
                )));
            }
            [lo, hi]
        }
        None => {
            let times = parsed.rows.iter().map(|(_, e)| e.time_hours);
            let lo = times.clone().fold(f64::INFINITY, f64::min);
            let hi = parsed
                .rows
                .iter()
                .map(|(_, e)| e.time_hours)
                .fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                return Err(Error::EmptyIngest);
            }
            [lo, if hi > lo { hi } else { lo + JITTER_HOURS }]
        }
    };

    // Expand multi-label events into the retained streams, origin-shifted.
    let mut streams: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (_, event) in &parsed.rows {
        if event.time_hours < span[0] || event.time_hours > span[1] {
            outside_span += 1;
            continue;
        }
        let mut seen: Vec<usize> = Vec::with_capacity(event.labels.len());
        for label in &event.labels {
            if let Some(&i) = index.get(label.as_str()) {
                if !seen.contains(&i) {
                    seen.push(i);
                    streams[i].push(event.time_hours - span[0]);
                }
            }
        }
    }

    // Stable sort keeps input order among equal timestamps, then the jitter
    // walk enforces strict ascent with k * JITTER_HOURS offsets per clash.
    let mut jittered_events = 0;
    for stream in &mut streams {
        stream.sort_by(|a, b| a.total_cmp(b));
        if config.jitter {
            for k in 1..stream.len() {
                if stream[k] <= stream[k - 1] {
                    stream[k] = stream[k - 1] + JITTER_HOURS;
                    jittered_events += 1;
                }
            }
        }
    }

    let events_per_stream: Vec<usize> = streams.iter().map(Vec::len).collect();
    if events_per_stream.iter().all(|&n| n == 0) {
        return Err(Error::EmptyIngest);
    }
    let t_end = (span[1] - span[0]).max(
        streams
            .iter()
            .filter_map(|s| s.last())
            .fold(0.0, |acc: f64, &t| acc.max(t)),
    );
    let streams = EventStreams::new(streams, 0.0, t_end)?;

    let summary = IngestSummary {
        format,
        total_rows: parsed.total_rows,
        parsed_rows,
        malformed: parsed.malformed,
        stance_filtered,
        outside_span,
        narrative_counts,
        dropped_narratives,
        labels: labels.clone(),
        events_per_stream,
        jittered_events,
        span_hours: span,
    };
    Ok((streams, labels, summary))
}

/// Write streams in the canonical format: `timestamp_hours,narrative`,
/// sorted by time then narrative, hours with fixed 9-decimal precision.
/// The span itself is not stored; to round-trip exactly, re-ingest with a
/// span override of `[t_start, t_end]`.
pub fn export_streams(streams: &EventStreams, labels: &[String], path: &Path) -> Result<()> {
    if labels.len() != streams.num_processes() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} processes",
            labels.len(),
            streams.num_processes()
        )));
    }
    let mut rows: Vec<(f64, &str)> = Vec::with_capacity(streams.total_events());
    for (i, stream) in streams.streams().iter().enumerate() {
        for &t in stream {
            rows.push((t, labels[i].as_str()));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["timestamp_hours", "narrative"])
        .map_err(Error::from)?;
    for (t, label) in rows {
        writer
            .write_record([format!("{t:.9}"), label.to_string()])
            .map_err(Error::from)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}
