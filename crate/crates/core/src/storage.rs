//! On-disk text formats.
//!
//! A session directory holds three files:
//!
//! ```text
//! meta.json     {"participant_id":"p01","video_id":"v1","sample_rate_hz":5}
//! eda.csv       t_ms,v
//!               1700000000000,0.8132
//! events.jsonl  {"t_ms":1700000000000,"e":"play"}
//! ```
//!
//! Aggregates and frisson series are single JSON objects on one line. Readers
//! reject files that violate the type invariants; nothing is repaired.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::align::{check_transition, EdaSample, EdaTrace, PlaybackEvent, PlaybackKind};
use crate::error::{Error, Result};
use crate::protocol::{
    aggregate_from_object, expect_keys, float_field, int_field, is_identifier, rate_number,
    str_field,
};
use crate::signal::{AggregateSeries, FrissonSeries};

pub const META_FILE: &str = "meta.json";
pub const EDA_FILE: &str = "eda.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
const EDA_HEADER: &str = "t_ms,v";

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub participant_id: String,
    pub video_id: String,
    pub eda: EdaTrace,
    pub events: Vec<PlaybackEvent>,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, id) in [("participant_id", &self.participant_id), ("video_id", &self.video_id)] {
            if !is_identifier(id) {
                return Err(Error::format(format!("invalid {name} {id:?}")));
            }
        }
        self.eda.validate()?;
        let mut prev = None;
        for e in &self.events {
            check_transition(prev, e)?;
            prev = Some(e);
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct MetaOut<'a> {
    participant_id: &'a str,
    video_id: &'a str,
    sample_rate_hz: serde_json::Number,
}

#[derive(Serialize)]
struct EventOut {
    t_ms: i64,
    e: &'static str,
}

/// Writes `meta.json`, `eda.csv` and `events.jsonl` into `dir`, creating it if needed.
pub fn write_session(dir: &Path, record: &SessionRecord) -> Result<()> {
    record.validate()?;
    fs::create_dir_all(dir)?;

    let meta = MetaOut {
        participant_id: &record.participant_id,
        video_id: &record.video_id,
        sample_rate_hz: rate_number(record.eda.sample_rate_hz)?,
    };
    fs::write(dir.join(META_FILE), json_line(&meta)?)?;

    let mut eda = String::with_capacity(24 * (record.eda.samples.len() + 1));
    eda.push_str(EDA_HEADER);
    eda.push('\n');
    for s in &record.eda.samples {
        let _ = writeln!(eda, "{},{}", s.t_ms, s.v);
    }
    fs::write(dir.join(EDA_FILE), eda)?;

    let mut events = String::new();
    for e in &record.events {
        events.push_str(&json_line(&EventOut {
            t_ms: e.t_wall_ms,
            e: e.kind.as_str(),
        })?);
    }
    fs::write(dir.join(EVENTS_FILE), events)?;
    Ok(())
}

pub fn read_session(dir: &Path) -> Result<SessionRecord> {
    let (participant_id, video_id, sample_rate_hz) = read_meta(&dir.join(META_FILE))?;
    let eda = read_eda(&dir.join(EDA_FILE), sample_rate_hz)?;
    let events = read_events(&dir.join(EVENTS_FILE))?;
    let record = SessionRecord {
        participant_id,
        video_id,
        eda,
        events,
    };
    record.validate().map_err(|e| match e {
        Error::Format(_) => e,
        other => Error::format(other.to_string()),
    })?;
    Ok(record)
}

fn read_meta(path: &Path) -> Result<(String, String, f64)> {
    let text = read_required(path)?;
    let parsed = parse_object(&text).and_then(|meta| {
        expect_keys(&meta, &["participant_id", "video_id", "sample_rate_hz"])?;
        Ok((
            str_field(&meta, "participant_id")?.to_string(),
            str_field(&meta, "video_id")?.to_string(),
            float_field(&meta, "sample_rate_hz")?,
        ))
    });
    parsed.map_err(|e| match e {
        Error::Format(_) => e,
        other => Error::format(format!("{}: {other}", path.display())),
    })
}

fn read_eda(path: &Path, sample_rate_hz: f64) -> Result<EdaTrace> {
    let text = read_required(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(EDA_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {EDA_HEADER:?}"),
        });
    }
    let mut samples: Vec<EdaSample> = Vec::new();
    for (i, row) in lines.enumerate() {
        let line = i + 2;
        let bad = |msg: String| Error::Parse { line, msg };
        let (t, v) = row
            .split_once(',')
            .ok_or_else(|| bad(format!("expected two fields in {row:?}")))?;
        let t_ms: i64 = t.parse().map_err(|_| bad(format!("invalid timestamp {t:?}")))?;
        let v: f64 = v.parse().map_err(|_| bad(format!("invalid value {v:?}")))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite value {v}")));
        }
        if samples.last().is_some_and(|p| t_ms < p.t_ms) {
            return Err(bad("timestamp regression".into()));
        }
        samples.push(EdaSample { t_ms, v });
    }
    EdaTrace::new(sample_rate_hz, samples).map_err(|e| Error::format(e.to_string()))
}

fn read_events(path: &Path) -> Result<Vec<PlaybackEvent>> {
    let text = read_required(path)?;
    text.lines()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 1;
            let parsed = parse_object(row).and_then(|obj| {
                expect_keys(&obj, &["t_ms", "e"])?;
                let kind: PlaybackKind = str_field(&obj, "e")?.parse()?;
                Ok(PlaybackEvent {
                    t_wall_ms: int_field(&obj, "t_ms")?,
                    kind,
                })
            });
            parsed.map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// `{"video_id":…,"grid_hz":5,"n_viewers":…,"values":[…]}` with at most nine
/// fractional digits per value.
pub fn write_aggregate(path: &Path, agg: &AggregateSeries) -> Result<()> {
    fs::write(path, aggregate_to_string(agg)?)?;
    Ok(())
}

pub fn aggregate_to_string(agg: &AggregateSeries) -> Result<String> {
    let agg = AggregateSeries::new(agg.video_id.clone(), agg.grid_hz, agg.n_viewers, agg.values.clone())?;
    let mut out = String::with_capacity(64 + 12 * agg.values.len());
    let _ = write!(
        out,
        "{{\"video_id\":{},\"grid_hz\":{},\"n_viewers\":{},\"values\":[",
        Value::String(agg.video_id.clone()),
        rate_number(agg.grid_hz)?,
        agg.n_viewers
    );
    for (i, v) in agg.values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_fraction(*v));
    }
    out.push_str("]}\n");
    Ok(out)
}

pub fn read_aggregate(path: &Path) -> Result<AggregateSeries> {
    let text = read_required(path)?;
    parse_aggregate(&text)
}

pub fn parse_aggregate(text: &str) -> Result<AggregateSeries> {
    parse_object(text.trim_end())
        .and_then(|obj| aggregate_from_object(&obj))
        .map_err(|e| Error::format(e.to_string()))
}

/// Rounds to nine fractional digits and drops trailing zeros.
fn format_fraction(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// A frisson series tagged with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FrissonRecord {
    pub participant_id: String,
    pub video_id: String,
    pub series: FrissonSeries,
}

#[derive(Serialize)]
struct FrissonOut<'a> {
    participant_id: &'a str,
    video_id: &'a str,
    grid_hz: serde_json::Number,
    values: &'a [u8],
}

pub fn write_frisson(path: &Path, record: &FrissonRecord) -> Result<()> {
    let out = FrissonOut {
        participant_id: &record.participant_id,
        video_id: &record.video_id,
        grid_hz: rate_number(record.series.grid_hz)?,
        values: &record.series.values,
    };
    fs::write(path, json_line(&out)?)?;
    Ok(())
}

pub fn read_frisson(path: &Path) -> Result<FrissonRecord> {
    let text = read_required(path)?;
    let parsed = parse_object(text.trim_end()).and_then(|obj| {
        expect_keys(&obj, &["participant_id", "video_id", "grid_hz", "values"])?;
        let Some(Value::Array(raw)) = obj.get("values") else {
            return Err(Error::format("values must be an array"));
        };
        let values = raw
            .iter()
            .map(|v| match v.as_u64() {
                Some(b @ (0 | 1)) => Ok(b as u8),
                _ => Err(Error::format(format!("non-binary value {v}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(FrissonRecord {
            participant_id: str_field(&obj, "participant_id")?.to_string(),
            video_id: str_field(&obj, "video_id")?.to_string(),
            series: FrissonSeries::new(float_field(&obj, "grid_hz")?, values)?,
        })
    });
    parsed.map_err(|e| match e {
        Error::Format(_) => e,
        other => Error::format(format!("{}: {other}", path.display())),
    })
}

/// All `*.json` frisson files in `dir` belonging to `video_id`, sorted by path.
pub fn read_frisson_dir(dir: &Path, video_id: &str) -> Result<Vec<FrissonRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let rec = read_frisson(&p)?;
        if rec.video_id == video_id {
            out.push(rec);
        }
    }
    Ok(out)
}

/// One time in seconds per line.
pub fn write_times(path: &Path, times: &[f64]) -> Result<()> {
    let mut out = String::new();
    for t in times {
        let _ = writeln!(out, "{t}");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_times(path: &Path) -> Result<Vec<f64>> {
    let text = read_required(path)?;
    let mut out = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let t: f64 = row.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("invalid time {row:?}"),
        })?;
        if !t.is_finite() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "non-finite time".into(),
            });
        }
        out.push(t);
    }
    Ok(out)
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::Encode(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn parse_object(text: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(obj)) => Ok(obj),
        Ok(_) => Err(Error::format("expected a JSON object")),
        Err(e) => Err(Error::format(e.to_string())),
    }
}

fn read_required(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::format(format!("missing file {}", path.display())),
        _ => Error::Io(e),
    })
}
