//! Line-delimited publish/subscribe wire format.
//!
//! Every frame is one UTF-8 JSON object on its own line, with keys in the
//! order `op`, `topic`, `data`. `topic` is present only for `pub`, `sub` and
//! `msg`. Unknown or missing keys are rejected. See `PROTOCOL.md` at the
//! repository root for the byte-level description.
//!
//! Topics:
//!
//! * `eda/{session}/{participant}`: data `{"t":<wall ms>,"v":<conductance>}`
//! * `playback/{session}/{participant}`: data `{"t":<wall ms>,"e":"play"|"stop"}`
//! * `feedback/{session}`: data `{"t":<wall ms>,"a":<magnitude>,"duty":<fraction>}`
//!
//! Subscription patterns may use `+` to match exactly one segment.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::align::{EdaSample, PlaybackEvent, PlaybackKind};
use crate::error::{Error, Result};
use crate::signal::AggregateSeries;

/// Lines longer than this are discarded by [`FrameDecoder`].
pub const MAX_LINE_BYTES: usize = 4 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Topic {
    Eda { session: String, participant: String },
    Playback { session: String, participant: String },
    Feedback { session: String },
}

impl Topic {
    pub fn eda(session: &str, participant: &str) -> Self {
        Topic::Eda {
            session: session.into(),
            participant: participant.into(),
        }
    }

    pub fn playback(session: &str, participant: &str) -> Self {
        Topic::Playback {
            session: session.into(),
            participant: participant.into(),
        }
    }

    pub fn feedback(session: &str) -> Self {
        Topic::Feedback {
            session: session.into(),
        }
    }

    pub fn session(&self) -> &str {
        match self {
            Topic::Eda { session, .. } | Topic::Playback { session, .. } | Topic::Feedback { session } => {
                session
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ids: &[&str] = match self {
            Topic::Eda { session, participant } | Topic::Playback { session, participant } => {
                &[session, participant]
            }
            Topic::Feedback { session } => &[session],
        };
        match ids.iter().find(|id| !is_identifier(id)) {
            Some(bad) => Err(Error::protocol(format!("invalid topic identifier {bad:?}"))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topic::Eda { session, participant } => write!(f, "eda/{session}/{participant}"),
            Topic::Playback { session, participant } => {
                write!(f, "playback/{session}/{participant}")
            }
            Topic::Feedback { session } => write!(f, "feedback/{session}"),
        }
    }
}

impl FromStr for Topic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !is_valid_topic(s) {
            return Err(Error::protocol(format!("malformed topic {s:?}")));
        }
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            ["eda", session, participant] => Ok(Topic::eda(session, participant)),
            ["playback", session, participant] => Ok(Topic::playback(session, participant)),
            ["feedback", session] => Ok(Topic::feedback(session)),
            _ => Err(Error::protocol(format!("topic {s:?} is not in the topic scheme"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackSample {
    pub t_ms: i64,
    pub a: f64,
    pub duty: f64,
}

/// Data carried by `pub` and `msg` frames; its kind follows the topic root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Eda(EdaSample),
    Playback(PlaybackEvent),
    Feedback(FeedbackSample),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    ParseError,
    ProtocolViolation,
    TsRegression,
    NotFound,
    InsufficientData,
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::ParseError => "parse_error",
            ErrorCode::ProtocolViolation => "protocol_violation",
            ErrorCode::TsRegression => "ts_regression",
            ErrorCode::NotFound => "not_found",
            ErrorCode::InsufficientData => "insufficient_data",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn from_error(err: &Error) -> Self {
        match err {
            Error::Malformed(_) | Error::Parse { .. } => ErrorCode::ParseError,
            Error::ProtocolViolation(_) => ErrorCode::ProtocolViolation,
            Error::NotFound(_) => ErrorCode::NotFound,
            Error::InsufficientData(_) => ErrorCode::InsufficientData,
            _ => ErrorCode::Internal,
        }
    }
}

impl FromStr for ErrorCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "parse_error" => ErrorCode::ParseError,
            "protocol_violation" => ErrorCode::ProtocolViolation,
            "ts_regression" => ErrorCode::TsRegression,
            "not_found" => ErrorCode::NotFound,
            "insufficient_data" => ErrorCode::InsufficientData,
            "internal" => ErrorCode::Internal,
            other => return Err(Error::protocol(format!("unknown error code {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Pub { topic: Topic, payload: Payload },
    Sub { pattern: String },
    Msg { topic: Topic, payload: Payload },
    GetAggregate { video: String },
    Aggregate(AggregateSeries),
    Err { code: ErrorCode, msg: String },
}

impl Frame {
    pub fn op(&self) -> &'static str {
        match self {
            Frame::Pub { .. } => "pub",
            Frame::Sub { .. } => "sub",
            Frame::Msg { .. } => "msg",
            Frame::GetAggregate { .. } => "get_aggregate",
            Frame::Aggregate(_) => "aggregate",
            Frame::Err { .. } => "err",
        }
    }

    pub fn error(code: ErrorCode, msg: impl Into<String>) -> Self {
        Frame::Err {
            code,
            msg: msg.into(),
        }
    }
}

// Field order of these structs is the wire order.

#[derive(Serialize)]
struct WireFrame<'a> {
    op: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    topic: Option<String>,
    data: Value,
}

#[derive(Serialize)]
struct EdaData {
    t: i64,
    v: f64,
}

#[derive(Serialize)]
struct PlaybackData {
    t: i64,
    e: &'static str,
}

#[derive(Serialize)]
struct FeedbackData {
    t: i64,
    a: f64,
    duty: f64,
}

#[derive(Serialize)]
struct GetAggregateData<'a> {
    video: &'a str,
}

#[derive(Serialize)]
struct AggregateData<'a> {
    video_id: &'a str,
    grid_hz: Number,
    n_viewers: usize,
    values: &'a [f64],
}

#[derive(Serialize)]
struct ErrData<'a> {
    code: &'static str,
    msg: &'a str,
}

/// Serializes a frame as one `\n`-terminated line.
pub fn encode(frame: &Frame) -> Result<Vec<u8>> {
    let (topic, data) = match frame {
        Frame::Pub { topic, payload } | Frame::Msg { topic, payload } => {
            topic.validate().map_err(|e| Error::Encode(e.to_string()))?;
            (Some(topic.to_string()), payload_value(topic, payload)?)
        }
        Frame::Sub { pattern } => {
            if !is_valid_pattern(pattern) {
                return Err(Error::Encode(format!("invalid subscription pattern {pattern:?}")));
            }
            (Some(pattern.clone()), Value::Object(Map::new()))
        }
        Frame::GetAggregate { video } => {
            if !is_identifier(video) {
                return Err(Error::Encode(format!("invalid video id {video:?}")));
            }
            (None, to_value(&GetAggregateData { video })?)
        }
        Frame::Aggregate(agg) => {
            AggregateSeries::new(agg.video_id.clone(), agg.grid_hz, agg.n_viewers, agg.values.clone())
                .map_err(|e| Error::Encode(e.to_string()))?;
            let data = AggregateData {
                video_id: &agg.video_id,
                grid_hz: rate_number(agg.grid_hz)?,
                n_viewers: agg.n_viewers,
                values: &agg.values,
            };
            (None, to_value(&data)?)
        }
        Frame::Err { code, msg } => (None, to_value(&ErrData { code: code.as_str(), msg })?),
    };
    let wire = WireFrame {
        op: frame.op(),
        topic,
        data,
    };
    let mut line = serde_json::to_vec(&wire).map_err(|e| Error::Encode(e.to_string()))?;
    line.push(b'\n');
    Ok(line)
}

fn to_value<T: Serialize>(data: &T) -> Result<Value> {
    serde_json::to_value(data).map_err(|e| Error::Encode(e.to_string()))
}

/// Integral rates are written without a fractional part (`5`, not `5.0`).
pub(crate) fn rate_number(hz: f64) -> Result<Number> {
    if !(hz.is_finite() && hz > 0.0) {
        return Err(Error::Encode(format!("invalid rate {hz}")));
    }
    if hz.fract() == 0.0 && hz < 9.0e15 {
        Ok(Number::from(hz as u64))
    } else {
        Number::from_f64(hz).ok_or_else(|| Error::Encode(format!("invalid rate {hz}")))
    }
}

fn payload_value(topic: &Topic, payload: &Payload) -> Result<Value> {
    let finite = |x: f64, name: &str| {
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::Encode(format!("{name} is not finite")))
        }
    };
    match (topic, payload) {
        (Topic::Eda { .. }, Payload::Eda(s)) => {
            finite(s.v, "v")?;
            to_value(&EdaData { t: s.t_ms, v: s.v })
        }
        (Topic::Playback { .. }, Payload::Playback(e)) => to_value(&PlaybackData {
            t: e.t_wall_ms,
            e: e.kind.as_str(),
        }),
        (Topic::Feedback { .. }, Payload::Feedback(f)) => {
            if !(0.0..=1.0).contains(&f.a) || !(0.0..=1.0).contains(&f.duty) {
                return Err(Error::Encode("feedback magnitude or duty outside [0, 1]".into()));
            }
            to_value(&FeedbackData {
                t: f.t_ms,
                a: f.a,
                duty: f.duty,
            })
        }
        _ => Err(Error::Encode(format!("payload does not match topic {topic}"))),
    }
}

/// Parses one line (with or without its trailing newline).
pub fn decode(line: &[u8]) -> Result<Frame> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if line.contains(&b'\n') {
        return Err(Error::Malformed("embedded newline".into()));
    }
    let value: Value =
        serde_json::from_slice(line).map_err(|e| Error::Malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(Error::protocol("frame is not an object"));
    };
    let op = match obj.get("op") {
        Some(Value::String(op)) => op.as_str(),
        Some(_) => return Err(Error::protocol("op is not a string")),
        None => return Err(Error::protocol("missing op")),
    };
    match op {
        "pub" | "msg" => {
            expect_keys(&obj, &["op", "topic", "data"])?;
            let topic: Topic = str_field(&obj, "topic")?.parse()?;
            let payload = decode_payload(&topic, object_field(&obj, "data")?)?;
            Ok(if op == "pub" {
                Frame::Pub { topic, payload }
            } else {
                Frame::Msg { topic, payload }
            })
        }
        "sub" => {
            expect_keys(&obj, &["op", "topic", "data"])?;
            let pattern = str_field(&obj, "topic")?;
            if !is_valid_pattern(pattern) {
                return Err(Error::protocol(format!("invalid subscription pattern {pattern:?}")));
            }
            expect_keys(object_field(&obj, "data")?, &[])?;
            Ok(Frame::Sub {
                pattern: pattern.to_string(),
            })
        }
        "get_aggregate" => {
            expect_keys(&obj, &["op", "data"])?;
            let data = object_field(&obj, "data")?;
            expect_keys(data, &["video"])?;
            let video = str_field(data, "video")?;
            if !is_identifier(video) {
                return Err(Error::protocol(format!("invalid video id {video:?}")));
            }
            Ok(Frame::GetAggregate {
                video: video.to_string(),
            })
        }
        "aggregate" => {
            expect_keys(&obj, &["op", "data"])?;
            let agg = aggregate_from_object(object_field(&obj, "data")?)
                .map_err(|e| Error::protocol(e.to_string()))?;
            Ok(Frame::Aggregate(agg))
        }
        "err" => {
            expect_keys(&obj, &["op", "data"])?;
            let data = object_field(&obj, "data")?;
            expect_keys(data, &["code", "msg"])?;
            Ok(Frame::Err {
                code: str_field(data, "code")?.parse()?,
                msg: str_field(data, "msg")?.to_string(),
            })
        }
        other => Err(Error::protocol(format!("unknown op {other:?}"))),
    }
}

fn decode_payload(topic: &Topic, data: &Map<String, Value>) -> Result<Payload> {
    match topic {
        Topic::Eda { .. } => {
            expect_keys(data, &["t", "v"])?;
            Ok(Payload::Eda(EdaSample {
                t_ms: int_field(data, "t")?,
                v: float_field(data, "v")?,
            }))
        }
        Topic::Playback { .. } => {
            expect_keys(data, &["t", "e"])?;
            Ok(Payload::Playback(PlaybackEvent {
                t_wall_ms: int_field(data, "t")?,
                kind: str_field(data, "e")?.parse::<PlaybackKind>()?,
            }))
        }
        Topic::Feedback { .. } => {
            expect_keys(data, &["t", "a", "duty"])?;
            let sample = FeedbackSample {
                t_ms: int_field(data, "t")?,
                a: float_field(data, "a")?,
                duty: float_field(data, "duty")?,
            };
            if !(0.0..=1.0).contains(&sample.a) || !(0.0..=1.0).contains(&sample.duty) {
                return Err(Error::protocol("feedback magnitude or duty outside [0, 1]"));
            }
            Ok(Payload::Feedback(sample))
        }
    }
}

/// Builds an [`AggregateSeries`] from its JSON object form, rejecting extra or missing keys.
pub(crate) fn aggregate_from_object(data: &Map<String, Value>) -> Result<AggregateSeries> {
    expect_keys(data, &["video_id", "grid_hz", "n_viewers", "values"])?;
    let video_id = str_field(data, "video_id")?.to_string();
    let grid_hz = float_field(data, "grid_hz")?;
    let n_viewers = match data.get("n_viewers").and_then(Value::as_u64) {
        Some(n) => n as usize,
        None => return Err(Error::protocol("n_viewers must be a non-negative integer")),
    };
    let Some(Value::Array(raw)) = data.get("values") else {
        return Err(Error::protocol("values must be an array"));
    };
    let values = raw
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::protocol("values must be numbers")))
        .collect::<Result<Vec<_>>>()?;
    AggregateSeries::new(video_id, grid_hz, n_viewers, values)
}

pub(crate) fn expect_keys(obj: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::protocol(format!("unknown field {k:?}")));
    }
    if let Some(k) = allowed.iter().find(|k| !obj.contains_key(**k)) {
        return Err(Error::protocol(format!("missing field {k:?}")));
    }
    Ok(())
}

pub(crate) fn str_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str> {
    obj.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| Error::protocol(format!("field {key:?} must be a string")))
}

fn object_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Map<String, Value>> {
    obj.get(key)
        .and_then(Value::as_object)
        .ok_or_else(|| Error::protocol(format!("field {key:?} must be an object")))
}

pub(crate) fn int_field(obj: &Map<String, Value>, key: &str) -> Result<i64> {
    obj.get(key)
        .and_then(Value::as_i64)
        .ok_or_else(|| Error::protocol(format!("field {key:?} must be an integer")))
}

pub(crate) fn float_field(obj: &Map<String, Value>, key: &str) -> Result<f64> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::protocol(format!("field {key:?} must be a number")))
}

/// Session, participant and video identifiers: `[A-Za-z0-9_-]+`.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn is_root_segment(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

/// `^[a-z_]+(/[A-Za-z0-9_-]+)*$`
pub fn is_valid_topic(topic: &str) -> bool {
    let mut parts = topic.split('/');
    parts.next().is_some_and(is_root_segment) && parts.all(is_identifier)
}

/// Like a topic, but any segment may be the `+` wildcard.
pub fn is_valid_pattern(pattern: &str) -> bool {
    let mut parts = pattern.split('/');
    parts.next().is_some_and(|s| s == "+" || is_root_segment(s))
        && parts.all(|s| s == "+" || is_identifier(s))
}

/// Segment-wise match where `+` in the pattern matches exactly one segment.
pub fn topic_match(pattern: &str, topic: &str) -> bool {
    let mut p = pattern.split('/');
    let mut t = topic.split('/');
    loop {
        match (p.next(), t.next()) {
            (None, None) => return true,
            (Some(ps), Some(ts)) if ps == "+" || ps == ts => continue,
            _ => return false,
        }
    }
}

/// Splits a byte stream into frames. A bad line yields one error and decoding
/// resumes at the next newline.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    discarding: bool,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Frame>> {
        let mut out = Vec::new();
        let mut rest = bytes;
        while let Some(pos) = rest.iter().position(|&b| b == b'\n') {
            let (head, tail) = rest.split_at(pos);
            rest = &tail[1..];
            if self.discarding {
                self.discarding = false;
                self.buf.clear();
                continue;
            }
            self.buf.extend_from_slice(head);
            out.push(decode(&self.buf));
            self.buf.clear();
        }
        if !self.discarding {
            self.buf.extend_from_slice(rest);
            if self.buf.len() > MAX_LINE_BYTES {
                self.buf.clear();
                self.discarding = true;
                out.push(Err(Error::Malformed(format!(
                    "line exceeds {MAX_LINE_BYTES} bytes"
                ))));
            }
        }
        out
    }

    /// Bytes left after the last newline; a non-empty remainder is a truncated frame.
    pub fn finish(self) -> Option<Result<Frame>> {
        if self.discarding || self.buf.is_empty() {
            None
        } else {
            Some(decode(&self.buf).and_then(|_| Err(Error::Malformed("unterminated line".into()))))
        }
    }
}
