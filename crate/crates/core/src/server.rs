//! Live ingestion, routing and feedback service.
//!
//! [`Hub`] owns all session state and routes frames; [`Server`] puts it behind
//! a TCP listener speaking the line protocol. Each connection has one reader
//! task that handles its frames in arrival order and one writer task draining
//! an unbounded queue, so slow subscribers never stall ingestion.
//!
//! Data directory layout:
//!
//! ```text
//! sessions/{session}/{participant}/   session records (meta.json, eda.csv, events.jsonl)
//! frisson/{video}/{session}-{participant}.json
//! aggregates/{video}.json
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::{mpsc, Notify};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use crate::align::{align_session, build_timeline, check_transition, EdaSample, EdaTrace, PlaybackEvent, PlaybackKind};
use crate::error::{Error, Result};
use crate::feedback::{magnitude_at, DesignParams};
use crate::protocol::{encode, topic_match, ErrorCode, FeedbackSample, Frame, FrameDecoder, Payload, Topic};
use crate::signal::{aggregate, process_session, AggregateSeries, FrissonSeries, PipelineConfig};
use crate::storage::{self, FrissonRecord, SessionRecord};

/// Environment variable that overrides the default data directory.
pub const DATA_DIR_ENV: &str = "FRISSON_DATA_DIR";

#[derive(Debug, Clone)]
pub struct HubConfig {
    pub data_dir: PathBuf,
    pub pipeline: PipelineConfig,
    pub design: DesignParams,
    /// Start a vibration ticker automatically when a viewer presses play.
    pub auto_feedback: bool,
    /// Defaults to the pipeline's grid rate.
    pub tick_hz: Option<f64>,
}

impl HubConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            pipeline: PipelineConfig::default(),
            design: DesignParams::default(),
            auto_feedback: false,
            tick_hz: None,
        }
    }

    fn tick_hz(&self) -> f64 {
        self.tick_hz.unwrap_or(self.pipeline.sample_rate_hz)
    }
}

/// Outbound side of one client connection.
#[derive(Debug, Clone)]
pub struct Connection {
    id: u64,
    tx: mpsc::UnboundedSender<Frame>,
}

impl Connection {
    pub fn id(&self) -> u64 {
        self.id
    }
}

#[derive(Debug, Clone)]
struct Subscription {
    conn: u64,
    pattern: String,
    tx: mpsc::UnboundedSender<Frame>,
}

#[derive(Debug, Default)]
struct ParticipantBuffers {
    eda: Vec<EdaSample>,
    events: Vec<PlaybackEvent>,
}

#[derive(Debug, Default)]
struct Participant {
    buffers: Mutex<ParticipantBuffers>,
    playback_changed: Notify,
}

#[derive(Debug, Default)]
struct Session {
    participants: Mutex<BTreeMap<String, Arc<Participant>>>,
    subscribers: Mutex<Vec<Subscription>>,
    tickers: Mutex<HashMap<String, JoinHandle<()>>>,
    video: Mutex<Option<String>>,
}

impl Session {
    fn participant(&self, id: &str) -> Arc<Participant> {
        self.participants.lock().entry(id.to_string()).or_default().clone()
    }
}

/// Outcome of [`Hub::finalize_session`].
#[derive(Debug, Clone)]
pub struct FinalizeReport {
    pub aggregate: Arc<AggregateSeries>,
    pub included: Vec<String>,
    /// Participants left out, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Set when viewers covered different durations and all series were cut to the shortest.
    pub truncated_to: Option<usize>,
}

pub struct Hub {
    config: HubConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    /// Subscriptions whose session segment is a wildcard.
    wildcard_subs: Mutex<Vec<Subscription>>,
    aggregates: Mutex<HashMap<String, Arc<AggregateSeries>>>,
    next_conn: AtomicU64,
    self_ref: Weak<Hub>,
}

impl Hub {
    pub fn new(config: HubConfig) -> Result<Arc<Self>> {
        config.pipeline.validate()?;
        config.design.validate()?;
        if !(config.tick_hz() > 0.0 && config.tick_hz().is_finite()) {
            return Err(Error::param("tick_hz must be positive"));
        }
        Ok(Arc::new_cyclic(|self_ref| Hub {
            config,
            sessions: RwLock::new(HashMap::new()),
            wildcard_subs: Mutex::new(Vec::new()),
            aggregates: Mutex::new(HashMap::new()),
            next_conn: AtomicU64::new(1),
            self_ref: self_ref.clone(),
        }))
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn connect(&self, tx: mpsc::UnboundedSender<Frame>) -> Connection {
        Connection {
            id: self.next_conn.fetch_add(1, Ordering::Relaxed),
            tx,
        }
    }

    /// Drops every subscription held by the connection.
    pub fn disconnect(&self, conn: &Connection) {
        self.wildcard_subs.lock().retain(|s| s.conn != conn.id);
        for session in self.sessions.read().values() {
            session.subscribers.lock().retain(|s| s.conn != conn.id);
        }
    }

    fn session(&self, id: &str) -> Arc<Session> {
        if let Some(s) = self.sessions.read().get(id) {
            return s.clone();
        }
        self.sessions.write().entry(id.to_string()).or_default().clone()
    }

    fn existing_session(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().get(id).cloned()
    }

    /// Names the video a live session is watching. Unbound sessions use their own id.
    pub fn bind_video(&self, session: &str, video: &str) {
        *self.session(session).video.lock() = Some(video.to_string());
    }

    fn video_for(&self, session: &Session, session_id: &str) -> String {
        session.video.lock().clone().unwrap_or_else(|| session_id.to_string())
    }

    /// Applies one inbound frame and returns the frames to send back to `conn`.
    pub fn handle_frame(&self, conn: &Connection, frame: Frame) -> Vec<Frame> {
        match frame {
            Frame::Pub { topic, payload } => self.publish(topic, payload),
            Frame::Sub { pattern } => {
                self.subscribe(conn, &pattern);
                Vec::new()
            }
            Frame::GetAggregate { video } => match self.get_aggregate(&video) {
                Ok(agg) => vec![Frame::Aggregate((*agg).clone())],
                Err(e) => vec![Frame::error(ErrorCode::from_error(&e), e.to_string())],
            },
            other => vec![Frame::error(
                ErrorCode::ProtocolViolation,
                format!("{} frames are server-to-client only", other.op()),
            )],
        }
    }

    fn subscribe(&self, conn: &Connection, pattern: &str) {
        let sub = Subscription {
            conn: conn.id,
            pattern: pattern.to_string(),
            tx: conn.tx.clone(),
        };
        let mut segments = pattern.split('/');
        let session_segment = segments.nth(1).filter(|s| *s != "+");
        match session_segment {
            Some(session) => push_unique(&mut self.session(session).subscribers.lock(), sub),
            None => push_unique(&mut self.wildcard_subs.lock(), sub),
        }
    }

    fn publish(&self, topic: Topic, payload: Payload) -> Vec<Frame> {
        let session = self.session(topic.session());
        match (&topic, &payload) {
            (Topic::Eda { participant, .. }, Payload::Eda(sample)) => {
                let p = session.participant(participant);
                let mut buf = p.buffers.lock();
                if let Some(last) = buf.eda.last() {
                    if sample.t_ms < last.t_ms {
                        return vec![Frame::error(
                            ErrorCode::TsRegression,
                            format!("{topic}: sample at {} precedes {}", sample.t_ms, last.t_ms),
                        )];
                    }
                }
                buf.eda.push(*sample);
            }
            (Topic::Playback { session: sid, participant }, Payload::Playback(event)) => {
                let p = session.participant(participant);
                {
                    let mut buf = p.buffers.lock();
                    if let Err(e) = check_transition(buf.events.last(), event) {
                        return vec![Frame::error(ErrorCode::ProtocolViolation, format!("{topic}: {e}"))];
                    }
                    buf.events.push(*event);
                }
                p.playback_changed.notify_waiters();
                if self.config.auto_feedback && event.kind == PlaybackKind::Play {
                    let running = session.tickers.lock().contains_key(participant.as_str());
                    if !running {
                        let video = self.video_for(&session, sid);
                        if let Err(e) = self.start_feedback(sid, participant, &video) {
                            self.route(&topic, &payload);
                            return vec![Frame::error(ErrorCode::from_error(&e), e.to_string())];
                        }
                    }
                }
            }
            (Topic::Feedback { .. }, Payload::Feedback(_)) => {}
            _ => {
                return vec![Frame::error(
                    ErrorCode::ProtocolViolation,
                    format!("payload does not match topic {topic}"),
                )]
            }
        }
        self.route(&topic, &payload);
        Vec::new()
    }

    /// Forwards a `msg` to every connection with a matching subscription, once per connection.
    fn route(&self, topic: &Topic, payload: &Payload) {
        let topic_str = topic.to_string();
        let mut targets: Vec<(u64, mpsc::UnboundedSender<Frame>)> = Vec::new();
        let mut collect = |subs: &[Subscription]| {
            for s in subs {
                if topic_match(&s.pattern, &topic_str) && !targets.iter().any(|(c, _)| *c == s.conn) {
                    targets.push((s.conn, s.tx.clone()));
                }
            }
        };
        if let Some(session) = self.existing_session(topic.session()) {
            collect(&session.subscribers.lock());
        }
        collect(&self.wildcard_subs.lock());
        for (_, tx) in targets {
            let _ = tx.send(Frame::Msg {
                topic: topic.clone(),
                payload: *payload,
            });
        }
    }

    /// Copies of one participant's buffers.
    pub fn participant_snapshot(&self, session: &str, participant: &str) -> Option<(Vec<EdaSample>, Vec<PlaybackEvent>)> {
        let session = self.existing_session(session)?;
        let p = session.participants.lock().get(participant)?.clone();
        let buf = p.buffers.lock();
        Some((buf.eda.clone(), buf.events.clone()))
    }

    pub fn participant_ids(&self, session: &str) -> Vec<String> {
        self.existing_session(session)
            .map(|s| s.participants.lock().keys().cloned().collect())
            .unwrap_or_default()
    }

    fn snapshot(&self, session_id: &str) -> Result<Vec<(String, ParticipantBuffers)>> {
        let session = self
            .existing_session(session_id)
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
        let participants: Vec<(String, Arc<Participant>)> = session
            .participants
            .lock()
            .iter()
            .map(|(id, p)| (id.clone(), p.clone()))
            .collect();
        Ok(participants
            .into_iter()
            .map(|(id, p)| {
                let buf = p.buffers.lock();
                (
                    id,
                    ParticipantBuffers {
                        eda: buf.eda.clone(),
                        events: buf.events.clone(),
                    },
                )
            })
            .collect())
    }

    /// Runs the pipeline for every participant of a session, aggregates, and persists
    /// session records, frisson series and the aggregate under the data directory.
    pub fn finalize_session(&self, session_id: &str, video_id: &str) -> Result<FinalizeReport> {
        let cfg = &self.config.pipeline;
        let snapshot = self.snapshot(session_id)?;

        let mut included: Vec<(String, ParticipantBuffers, FrissonSeries)> = Vec::new();
        let mut skipped = Vec::new();
        for (id, buf) in snapshot {
            match frisson_for(&buf, cfg) {
                Ok(series) => included.push((id, buf, series)),
                Err(reason) => {
                    info!(session = session_id, participant = %id, %reason, "participant skipped");
                    skipped.push((id, reason));
                }
            }
        }
        if included.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no participant of session {session_id} has usable data"
            )));
        }

        let min_len = included.iter().map(|(_, _, s)| s.len()).min().unwrap_or(0);
        let truncated_to = included
            .iter()
            .any(|(_, _, s)| s.len() != min_len)
            .then_some(min_len);
        if truncated_to.is_some() {
            for (_, _, s) in &mut included {
                s.values.truncate(min_len);
            }
        }

        let series: Vec<FrissonSeries> = included.iter().map(|(_, _, s)| s.clone()).collect();
        let agg = Arc::new(aggregate(video_id, &series)?);

        let root = &self.config.data_dir;
        let frisson_dir = root.join("frisson").join(video_id);
        std::fs::create_dir_all(&frisson_dir)?;
        for (id, buf, series) in &included {
            let record = SessionRecord {
                participant_id: id.clone(),
                video_id: video_id.to_string(),
                eda: EdaTrace::new(cfg.sample_rate_hz, buf.eda.clone())?,
                events: buf.events.clone(),
            };
            storage::write_session(&session_dir(root, session_id, id), &record)?;
            storage::write_frisson(
                &frisson_dir.join(format!("{session_id}-{id}.json")),
                &FrissonRecord {
                    participant_id: id.clone(),
                    video_id: video_id.to_string(),
                    series: series.clone(),
                },
            )?;
        }
        write_aggregate_file(root, &agg)?;
        self.aggregates.lock().insert(video_id.to_string(), agg.clone());

        Ok(FinalizeReport {
            aggregate: agg,
            included: included.into_iter().map(|(id, _, _)| id).collect(),
            skipped,
            truncated_to,
        })
    }

    /// Cached aggregate, else the stored aggregate file, else one computed from stored
    /// frisson series.
    pub fn get_aggregate(&self, video_id: &str) -> Result<Arc<AggregateSeries>> {
        if let Some(agg) = self.aggregates.lock().get(video_id) {
            return Ok(agg.clone());
        }
        let root = &self.config.data_dir;
        let stored = root.join("aggregates").join(format!("{video_id}.json"));
        let agg = if stored.is_file() {
            Arc::new(storage::read_aggregate(&stored)?)
        } else {
            let frisson_dir = root.join("frisson").join(video_id);
            let records = if frisson_dir.is_dir() {
                storage::read_frisson_dir(&frisson_dir, video_id)?
            } else {
                Vec::new()
            };
            if !records.is_empty() {
                let series: Vec<FrissonSeries> = records.into_iter().map(|r| r.series).collect();
                let agg = Arc::new(aggregate(video_id, &series)?);
                write_aggregate_file(root, &agg)?;
                agg
            } else {
                return Err(Error::NotFound(format!("no aggregate for video {video_id}")));
            }
        };
        self.aggregates.lock().insert(video_id.to_string(), agg.clone());
        Ok(agg)
    }

    /// Starts a ticker that publishes vibration feedback to `feedback/{session}`
    /// following `participant`'s playback. Requires a Tokio runtime.
    pub fn start_feedback(&self, session_id: &str, participant: &str, video_id: &str) -> Result<()> {
        let agg = self.get_aggregate(video_id)?;
        let session = self.session(session_id);
        let p = session.participant(participant);
        let hub = self.self_ref.clone();
        let ticker = FeedbackTicker::new(session_id, agg, self.config.tick_hz(), self.config.design)?;
        let handle = tokio::spawn(run_ticker(hub, ticker, p));
        if let Some(old) = session.tickers.lock().insert(participant.to_string(), handle) {
            old.abort();
        }
        debug!(session = session_id, participant, video = video_id, "feedback ticker started");
        Ok(())
    }

    pub fn stop_feedback(&self, session_id: &str, participant: &str) {
        if let Some(session) = self.existing_session(session_id) {
            if let Some(handle) = session.tickers.lock().remove(participant) {
                handle.abort();
            }
        }
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Finalizes every live session against its bound video.
    pub fn finalize_all(&self) -> Vec<(String, Result<FinalizeReport>)> {
        self.session_ids()
            .into_iter()
            .map(|sid| {
                let video = match self.existing_session(&sid) {
                    Some(session) => self.video_for(&session, &sid),
                    None => sid.clone(),
                };
                let report = self.finalize_session(&sid, &video);
                (sid, report)
            })
            .collect()
    }

    /// Writes every live participant's raw record to `sessions/`. Returns how many were written.
    pub fn persist_sessions(&self) -> Result<usize> {
        let mut written = 0;
        for sid in self.session_ids() {
            let Some(session) = self.existing_session(&sid) else { continue };
            let video = self.video_for(&session, &sid);
            for (pid, buf) in self.snapshot(&sid)? {
                let record = SessionRecord {
                    participant_id: pid.clone(),
                    video_id: video.clone(),
                    eda: EdaTrace::new(self.config.pipeline.sample_rate_hz, buf.eda)?,
                    events: buf.events,
                };
                storage::write_session(&session_dir(&self.config.data_dir, &sid, &pid), &record)?;
                written += 1;
            }
        }
        Ok(written)
    }
}

impl Drop for Hub {
    fn drop(&mut self) {
        for session in self.sessions.get_mut().values() {
            for (_, handle) in session.tickers.lock().drain() {
                handle.abort();
            }
        }
    }
}

fn push_unique(list: &mut Vec<Subscription>, sub: Subscription) {
    if !list.iter().any(|s| s.conn == sub.conn && s.pattern == sub.pattern) {
        list.push(sub);
    }
}

fn session_dir(root: &Path, session: &str, participant: &str) -> PathBuf {
    root.join("sessions").join(session).join(participant)
}

fn write_aggregate_file(root: &Path, agg: &AggregateSeries) -> Result<()> {
    let dir = root.join("aggregates");
    std::fs::create_dir_all(&dir)?;
    storage::write_aggregate(&dir.join(format!("{}.json", agg.video_id)), agg)
}

/// Aligns and processes one participant; the error string is the skip reason.
fn frisson_for(buf: &ParticipantBuffers, cfg: &PipelineConfig) -> std::result::Result<FrissonSeries, String> {
    if buf.events.is_empty() {
        return Err("no playback events".into());
    }
    if buf.eda.is_empty() {
        return Err("no EDA samples".into());
    }
    let run = || -> Result<FrissonSeries> {
        let trace = EdaTrace::new(cfg.sample_rate_hz, buf.eda.clone())?;
        process_session(&align_session(&trace, &buf.events, cfg.sample_rate_hz)?, cfg)
    };
    run().map_err(|e| e.to_string())
}

pub fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Emits aggregate magnitudes on the video-time grid while a viewer plays.
///
/// Frames are due whenever video time crosses a multiple of `1 / tick_hz`, so a
/// pause followed by a resume continues with the next grid point. When polled
/// late, only the most recent due point is emitted.
#[derive(Debug, Clone)]
pub struct FeedbackTicker {
    pub session_id: String,
    pub aggregate: Arc<AggregateSeries>,
    pub tick_hz: f64,
    design: DesignParams,
    next_index: Option<i64>,
}

impl FeedbackTicker {
    pub fn new(session_id: &str, aggregate: Arc<AggregateSeries>, tick_hz: f64, design: DesignParams) -> Result<Self> {
        if !(tick_hz.is_finite() && tick_hz > 0.0) {
            return Err(Error::param("tick_hz must be positive"));
        }
        if aggregate.is_empty() {
            return Err(Error::input("aggregate is empty"));
        }
        Ok(Self {
            session_id: session_id.to_string(),
            aggregate,
            tick_hz,
            design,
            next_index: None,
        })
    }

    fn step_ms(&self) -> f64 {
        1000.0 / self.tick_hz
    }

    /// The frame due at wall time `now_ms` under the given playback events, if any.
    pub fn poll(&mut self, events: &[PlaybackEvent], now_ms: i64) -> Option<FeedbackSample> {
        let timeline = build_timeline(events).ok()?;
        if !timeline.is_playing_at(now_ms) {
            return None;
        }
        let video_ms = timeline.video_time_ms(now_ms);
        let current = (video_ms as f64 / self.step_ms() + 1e-9).floor() as i64;
        let next = *self.next_index.get_or_insert(current);
        if current < next {
            return None;
        }
        self.next_index = Some(current + 1);
        let a = magnitude_at(&self.aggregate, current as f64 / self.tick_hz).ok()?;
        let duty = self.design.vibration(a).ok()?;
        Some(FeedbackSample { t_ms: now_ms, a, duty })
    }

    /// Wall time at which the next frame falls due, if the viewer is playing.
    pub fn next_due_ms(&self, events: &[PlaybackEvent], now_ms: i64) -> Option<i64> {
        let timeline = build_timeline(events).ok()?;
        if !timeline.is_playing_at(now_ms) {
            return None;
        }
        let next = self.next_index?;
        let video_ms = (next as f64 * self.step_ms()).ceil() as i64;
        timeline.wall_time_at(video_ms)
    }
}

async fn run_ticker(hub: Weak<Hub>, mut ticker: FeedbackTicker, participant: Arc<Participant>) {
    let topic = Topic::feedback(&ticker.session_id);
    let step = Duration::from_secs_f64(1.0 / ticker.tick_hz);
    loop {
        let notified = participant.playback_changed.notified();
        tokio::pin!(notified);
        notified.as_mut().enable();

        let events = participant.buffers.lock().events.clone();
        let now = now_ms();
        if let Some(sample) = ticker.poll(&events, now) {
            let Some(hub) = hub.upgrade() else { return };
            hub.route(&topic, &Payload::Feedback(sample));
        }
        let wait = match ticker.next_due_ms(&events, now) {
            Some(due) => Duration::from_millis((due - now).max(1) as u64).min(step),
            None => step,
        };
        tokio::select! {
            _ = tokio::time::sleep(wait) => {}
            _ = &mut notified => {}
        }
        if hub.strong_count() == 0 {
            return;
        }
    }
}

/// TCP front end for a [`Hub`].
pub struct Server {
    hub: Arc<Hub>,
    listener: TcpListener,
}

impl Server {
    pub async fn bind(addr: impl ToSocketAddrs, hub: Arc<Hub>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        Ok(Self { hub, listener })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn hub(&self) -> Arc<Hub> {
        self.hub.clone()
    }

    /// Accepts connections until the task is dropped or aborted.
    pub async fn run(self) -> io::Result<()> {
        info!(addr = %self.listener.local_addr()?, "listening");
        loop {
            let (stream, peer) = self.listener.accept().await?;
            let hub = self.hub.clone();
            tokio::spawn(async move {
                if let Err(e) = serve_connection(hub, stream).await {
                    debug!(%peer, error = %e, "connection closed with error");
                }
            });
        }
    }
}

async fn serve_connection(hub: Arc<Hub>, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let (mut reader, mut writer) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Frame>();
    let conn = hub.connect(tx.clone());

    let writer_task = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            match encode(&frame) {
                Ok(bytes) => writer.write_all(&bytes).await?,
                Err(e) => warn!(error = %e, "dropping unencodable frame"),
            }
        }
        writer.shutdown().await
    });

    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 16 * 1024];
    let result = loop {
        let n = match reader.read(&mut buf).await {
            Ok(0) => break Ok(()),
            Ok(n) => n,
            Err(e) => break Err(e),
        };
        for decoded in decoder.push(&buf[..n]) {
            let replies = match decoded {
                Ok(frame) => hub.handle_frame(&conn, frame),
                Err(e) => vec![Frame::error(ErrorCode::from_error(&e), e.to_string())],
            };
            for reply in replies {
                let _ = tx.send(reply);
            }
        }
    };
    if let Some(Err(e)) = decoder.finish() {
        let _ = tx.send(Frame::error(ErrorCode::from_error(&e), e.to_string()));
    }
    hub.disconnect(&conn);
    drop(conn);
    drop(tx);
    match writer_task.await {
        Ok(write_result) => result.and(write_result),
        Err(e) => Err(io::Error::other(e)),
    }
}
