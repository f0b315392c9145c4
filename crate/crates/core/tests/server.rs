use std::sync::Arc;
use std::time::Duration;

use frisson_core::protocol::{decode, encode, ErrorCode, Payload, Topic};
use frisson_core::server::{now_ms, Hub, HubConfig, Server};
use frisson_core::signal::aggregate;
use frisson_core::simulator::{simulate_cohort, CohortSpec};
use frisson_core::storage::{self, FrissonRecord};
use frisson_core::{AggregateSeries, EdaSample, EdaTrace, Frame, FrissonSeries, PlaybackEvent};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::time::timeout;

struct Client {
    lines: tokio::io::Lines<BufReader<OwnedReadHalf>>,
    w: OwnedWriteHalf,
}

impl Client {
    async fn connect(addr: std::net::SocketAddr) -> Self {
        let (r, w) = TcpStream::connect(addr).await.unwrap().into_split();
        Self { lines: BufReader::new(r).lines(), w }
    }

    async fn send(&mut self, frame: &Frame) {
        self.w.write_all(&encode(frame).unwrap()).await.unwrap();
    }

    async fn send_raw(&mut self, bytes: &[u8]) {
        self.w.write_all(bytes).await.unwrap();
    }

    async fn recv(&mut self) -> Frame {
        let line = timeout(Duration::from_secs(5), self.lines.next_line())
            .await
            .expect("timed out waiting for a frame")
            .unwrap()
            .expect("connection closed");
        decode(line.as_bytes()).unwrap()
    }

    async fn recv_within(&mut self, ms: u64) -> Option<Frame> {
        match timeout(Duration::from_millis(ms), self.lines.next_line()).await {
            Ok(Ok(Some(line))) => Some(decode(line.as_bytes()).unwrap()),
            _ => None,
        }
    }

    /// Round-trips a request so that everything sent before it has been handled.
    async fn sync(&mut self) {
        self.send(&Frame::GetAggregate { video: "__sync__".into() }).await;
        loop {
            if let Frame::Err { code: ErrorCode::NotFound, msg } = self.recv().await {
                if msg.contains("__sync__") {
                    return;
                }
            }
        }
    }
}

async fn start(config: HubConfig) -> (Arc<Hub>, std::net::SocketAddr) {
    let hub = Hub::new(config).unwrap();
    let server = Server::bind("127.0.0.1:0", hub.clone()).await.unwrap();
    let addr = server.local_addr().unwrap();
    tokio::spawn(server.run());
    (hub, addr)
}

fn eda(session: &str, participant: &str, t_ms: i64, v: f64) -> Frame {
    Frame::Pub {
        topic: Topic::eda(session, participant),
        payload: Payload::Eda(EdaSample { t_ms, v }),
    }
}

fn playback(session: &str, participant: &str, e: PlaybackEvent) -> Frame {
    Frame::Pub {
        topic: Topic::playback(session, participant),
        payload: Payload::Playback(e),
    }
}

#[tokio::test]
async fn routes_to_subscribers_in_publication_order() {
    let dir = tempfile::tempdir().unwrap();
    let (_hub, addr) = start(HubConfig::new(dir.path())).await;
    let mut a = Client::connect(addr).await;
    let mut b = Client::connect(addr).await;
    let mut sensor = Client::connect(addr).await;
    a.send(&Frame::Sub { pattern: "eda/s1/+".into() }).await;
    b.send(&Frame::Sub { pattern: "eda/+/p2".into() }).await;
    a.sync().await;
    b.sync().await;
    for i in 0..100 {
        sensor.send(&eda("s1", if i % 2 == 0 { "p1" } else { "p2" }, i, i as f64)).await;
    }
    for i in 0..100 {
        match a.recv().await {
            Frame::Msg { payload: Payload::Eda(s), .. } => assert_eq!(s.t_ms, i),
            other => panic!("unexpected {other:?}"),
        }
    }
    for i in (1..100).step_by(2) {
        match b.recv().await {
            Frame::Msg { topic, payload: Payload::Eda(s) } => {
                assert_eq!(topic.to_string(), "eda/s1/p2");
                assert_eq!(s.t_ms, i);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[tokio::test]
async fn error_replies_on_the_wire() {
    let dir = tempfile::tempdir().unwrap();
    let (hub, addr) = start(HubConfig::new(dir.path())).await;
    let mut c = Client::connect(addr).await;

    c.send(&eda("s1", "p1", 1000, 0.5)).await;
    c.send(&eda("s1", "p1", 999, 0.5)).await;
    assert!(matches!(c.recv().await, Frame::Err { code: ErrorCode::TsRegression, .. }));

    c.send_raw(b"{not json\n").await;
    assert!(matches!(c.recv().await, Frame::Err { code: ErrorCode::ParseError, .. }));
    c.send_raw(b"{\"op\":\"pub\",\"topic\":\"eda/s1/p1\",\"data\":{\"t\":5,\"v\":1,\"x\":2}}\n").await;
    assert!(matches!(c.recv().await, Frame::Err { code: ErrorCode::ProtocolViolation, .. }));
    c.send(&playback("s1", "p1", PlaybackEvent::stop(1))).await;
    assert!(matches!(c.recv().await, Frame::Err { code: ErrorCode::ProtocolViolation, .. }));
    c.send(&Frame::GetAggregate { video: "missing".into() }).await;
    assert!(matches!(c.recv().await, Frame::Err { code: ErrorCode::NotFound, .. }));

    // The stream resynchronized after every bad line.
    c.send(&eda("s1", "p1", 2000, 0.7)).await;
    c.sync().await;
    let (samples, _) = hub.participant_snapshot("s1", "p1").unwrap();
    assert_eq!(samples.iter().map(|s| s.t_ms).collect::<Vec<_>>(), vec![1000, 2000]);
}

#[tokio::test]
async fn get_aggregate_from_stored_frisson_series() {
    let dir = tempfile::tempdir().unwrap();
    let frisson_dir = dir.path().join("frisson/v7");
    std::fs::create_dir_all(&frisson_dir).unwrap();
    let mut series = Vec::new();
    for p in 0..20 {
        let values: Vec<u8> = (0..300).map(|k| u8::from((k * 7 + p * 13) % 11 < 3)).collect();
        let s = FrissonSeries::new(5.0, values).unwrap();
        storage::write_frisson(
            &frisson_dir.join(format!("p{p:02}.json")),
            &FrissonRecord { participant_id: format!("p{p:02}"), video_id: "v7".into(), series: s.clone() },
        )
        .unwrap();
        series.push(s);
    }
    let (_hub, addr) = start(HubConfig::new(dir.path())).await;
    let mut c = Client::connect(addr).await;
    c.send(&Frame::GetAggregate { video: "v7".into() }).await;
    match c.recv().await {
        Frame::Aggregate(agg) => assert_eq!(agg, aggregate("v7", &series).unwrap()),
        other => panic!("unexpected {other:?}"),
    }
    assert!(dir.path().join("aggregates/v7.json").is_file());
}

async fn ingest(addr: std::net::SocketAddr, frames: Vec<Frame>) {
    let mut c = Client::connect(addr).await;
    for f in &frames {
        c.send(f).await;
    }
    c.sync().await;
}

fn cohort_frames(session: &str) -> Vec<Vec<Frame>> {
    let spec = CohortSpec { participants: 6, duration_s: 120.0, events_per_participant: 3, ..CohortSpec::default() };
    simulate_cohort(&spec)
        .unwrap()
        .into_iter()
        .map(|p| {
            let trace = EdaTrace::from(&p.series);
            let mut frames = vec![playback(session, &p.participant_id, p.events[0])];
            frames.extend(trace.samples.iter().map(|s| eda(session, &p.participant_id, s.t_ms, s.v)));
            frames.push(playback(session, &p.participant_id, p.events[1]));
            frames
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_ingestion_equals_serial() {
    let serial_dir = tempfile::tempdir().unwrap();
    let (serial_hub, serial_addr) = start(HubConfig::new(serial_dir.path())).await;
    ingest(serial_addr, cohort_frames("s").into_iter().flatten().collect()).await;

    let conc_dir = tempfile::tempdir().unwrap();
    let (conc_hub, conc_addr) = start(HubConfig::new(conc_dir.path())).await;
    let tasks: Vec<_> = cohort_frames("s")
        .into_iter()
        .map(|frames| tokio::spawn(ingest(conc_addr, frames)))
        .collect();
    for t in tasks {
        t.await.unwrap();
    }

    assert_eq!(serial_hub.participant_ids("s"), conc_hub.participant_ids("s"));
    for p in serial_hub.participant_ids("s") {
        assert_eq!(serial_hub.participant_snapshot("s", &p), conc_hub.participant_snapshot("s", &p));
    }
    let a = serial_hub.finalize_session("s", "v").unwrap();
    let b = conc_hub.finalize_session("s", "v").unwrap();
    assert_eq!(a.aggregate, b.aggregate);
    assert_eq!(a.aggregate.n_viewers, 6);
    let again = serial_hub.finalize_session("s", "v").unwrap();
    assert_eq!(again.aggregate, a.aggregate);
}

#[tokio::test]
async fn feedback_ticks_while_playing_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("aggregates")).unwrap();
    let agg = AggregateSeries::new("s9".into(), 5.0, 4, vec![1.0; 600]).unwrap();
    storage::write_aggregate(&dir.path().join("aggregates/s9.json"), &agg).unwrap();

    let config = HubConfig { auto_feedback: true, ..HubConfig::new(dir.path()) };
    let (_hub, addr) = start(config).await;
    let mut viewer = Client::connect(addr).await;
    viewer.send(&Frame::Sub { pattern: "feedback/s9".into() }).await;
    viewer.sync().await;

    viewer.send(&playback("s9", "p1", PlaybackEvent::play(now_ms()))).await;
    let mut ticks = 0;
    let started = std::time::Instant::now();
    while ticks < 5 {
        match viewer.recv().await {
            Frame::Msg { payload: Payload::Feedback(f), .. } => {
                assert_eq!(f.a, 1.0);
                assert!((f.duty - 0.7).abs() < 1e-12);
                ticks += 1;
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    // Five ticks at 5 Hz span at least 0.8 s of playback.
    assert!(started.elapsed() >= Duration::from_millis(700));

    viewer.send(&playback("s9", "p1", PlaybackEvent::stop(now_ms()))).await;
    viewer.sync().await;
    // A frame already in flight may still arrive; after that, silence.
    let _ = viewer.recv_within(100).await;
    assert!(viewer.recv_within(600).await.is_none());
}

#[tokio::test]
async fn auto_feedback_without_aggregate_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let config = HubConfig { auto_feedback: true, ..HubConfig::new(dir.path()) };
    let (_hub, addr) = start(config).await;
    let mut viewer = Client::connect(addr).await;
    viewer.send(&playback("nov", "p1", PlaybackEvent::play(now_ms()))).await;
    assert!(matches!(viewer.recv().await, Frame::Err { code: ErrorCode::NotFound, .. }));
}
