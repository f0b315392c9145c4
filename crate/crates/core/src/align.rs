//! Wall-clock to video-time alignment.
//!
//! Only play and stop are recorded, so video position is accumulated play
//! time. EDA samples taken while the video was stopped are dropped, and the
//! rest are placed on a uniform video-time grid by nearest-sample lookup.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::signal::EdaSeries;

/// One timestamped EDA reading as it arrives from a sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdaSample {
    pub t_ms: i64,
    pub v: f64,
}

/// Raw EDA readings with explicit wall-clock timestamps and a nominal rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaTrace {
    pub sample_rate_hz: f64,
    pub samples: Vec<EdaSample>,
}

impl EdaTrace {
    pub fn new(sample_rate_hz: f64, samples: Vec<EdaSample>) -> Result<Self> {
        let trace = Self {
            sample_rate_hz,
            samples,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Positive rate, finite values, nondecreasing timestamps.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::param("sample_rate_hz must be positive"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.v.is_finite() {
                return Err(Error::input(format!("non-finite EDA value at sample {i}")));
            }
            if i > 0 && s.t_ms < self.samples[i - 1].t_ms {
                return Err(Error::input(format!("EDA timestamp regression at sample {i}")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn period_ms(&self) -> i64 {
        (1000.0 / self.sample_rate_hz).round() as i64
    }
}

impl From<&EdaSeries> for EdaTrace {
    fn from(series: &EdaSeries) -> Self {
        let step = 1000.0 / series.sample_rate_hz;
        let samples = series
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| EdaSample {
                t_ms: series.start_wall_ms + (i as f64 * step).round() as i64,
                v,
            })
            .collect();
        Self {
            sample_rate_hz: series.sample_rate_hz,
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlaybackKind {
    Play,
    Stop,
    /// Reserved on the wire; timelines reject it.
    Seek,
}

impl PlaybackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlaybackKind::Play => "play",
            PlaybackKind::Stop => "stop",
            PlaybackKind::Seek => "seek",
        }
    }
}

impl fmt::Display for PlaybackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlaybackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "play" => Ok(PlaybackKind::Play),
            "stop" => Ok(PlaybackKind::Stop),
            "seek" => Ok(PlaybackKind::Seek),
            other => Err(Error::protocol(format!("unknown playback event {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaybackEvent {
    pub t_wall_ms: i64,
    pub kind: PlaybackKind,
}

impl PlaybackEvent {
    pub fn play(t_wall_ms: i64) -> Self {
        Self { t_wall_ms, kind: PlaybackKind::Play }
    }

    pub fn stop(t_wall_ms: i64) -> Self {
        Self { t_wall_ms, kind: PlaybackKind::Stop }
    }
}

/// Checks that `next` may follow `prev` (or open a timeline when `prev` is `None`).
pub fn check_transition(prev: Option<&PlaybackEvent>, next: &PlaybackEvent) -> Result<()> {
    if next.t_wall_ms < 0 {
        return Err(Error::protocol("negative playback timestamp"));
    }
    if next.kind == PlaybackKind::Seek {
        return Err(Error::protocol("seek events are not supported"));
    }
    match prev {
        None if next.kind != PlaybackKind::Play => {
            Err(Error::protocol("timeline must begin with play"))
        }
        None => Ok(()),
        Some(p) if p.kind == next.kind => Err(Error::protocol(format!(
            "two consecutive {} events at {} and {}",
            next.kind, p.t_wall_ms, next.t_wall_ms
        ))),
        Some(p) if next.t_wall_ms <= p.t_wall_ms => Err(Error::protocol(format!(
            "playback timestamps not increasing: {} then {}",
            p.t_wall_ms, next.t_wall_ms
        ))),
        Some(_) => Ok(()),
    }
}

/// Validated play/stop sequence defining the wall-clock to video-time map.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaybackTimeline {
    events: Vec<PlaybackEvent>,
    video_duration_s: Option<f64>,
}

/// Validates alternation (starting with play) and strictly increasing timestamps.
pub fn build_timeline(events: &[PlaybackEvent]) -> Result<PlaybackTimeline> {
    if events.is_empty() {
        return Err(Error::protocol("no playback events"));
    }
    let mut prev = None;
    for e in events {
        check_transition(prev, e)?;
        prev = Some(e);
    }
    Ok(PlaybackTimeline {
        events: events.to_vec(),
        video_duration_s: None,
    })
}

impl PlaybackTimeline {
    /// Caps video time at the known video length.
    pub fn with_duration_bound(mut self, video_duration_s: f64) -> Result<Self> {
        if !(video_duration_s.is_finite() && video_duration_s >= 0.0) {
            return Err(Error::param("video duration must be finite and >= 0"));
        }
        self.video_duration_s = Some(video_duration_s);
        Ok(self)
    }

    pub fn events(&self) -> &[PlaybackEvent] {
        &self.events
    }

    pub fn video_duration_s(&self) -> Option<f64> {
        self.video_duration_s
    }

    /// True when the last event is a play that was never stopped.
    pub fn is_open(&self) -> bool {
        self.events.last().is_some_and(|e| e.kind == PlaybackKind::Play)
    }

    /// Play intervals as `[start, end)`; the last one has no end when open.
    pub fn play_intervals(&self) -> impl Iterator<Item = (i64, Option<i64>)> + '_ {
        self.events
            .chunks(2)
            .map(|pair| (pair[0].t_wall_ms, pair.get(1).map(|e| e.t_wall_ms)))
    }

    pub fn total_played_ms(&self) -> Option<i64> {
        if self.is_open() {
            return None;
        }
        Some(self.play_intervals().map(|(s, e)| e.unwrap_or(s) - s).sum())
    }

    pub fn is_playing_at(&self, t_wall_ms: i64) -> bool {
        self.play_intervals()
            .any(|(s, e)| t_wall_ms >= s && e.is_none_or(|e| t_wall_ms < e))
    }

    /// Accumulated play time up to `t_wall_ms`, in milliseconds.
    pub fn video_time_ms(&self, t_wall_ms: i64) -> i64 {
        let played: i64 = self
            .play_intervals()
            .map(|(s, e)| {
                let end = e.map_or(t_wall_ms, |e| e.min(t_wall_ms));
                (end - s).max(0)
            })
            .sum();
        match self.video_duration_s {
            Some(bound) => played.min((bound * 1000.0).round() as i64),
            None => played,
        }
    }

    /// Wall time at which playback passes `video_ms` while playing, if it ever does.
    /// A position reached exactly at a stop maps to the following play.
    pub fn wall_time_at(&self, video_ms: i64) -> Option<i64> {
        let mut acc = 0i64;
        for (s, e) in self.play_intervals() {
            match e {
                Some(e) if acc + (e - s) <= video_ms && video_ms != acc => acc += e - s,
                _ => return Some(s + (video_ms - acc).max(0)),
            }
        }
        None
    }
}

/// Video time in seconds at wall time `t_wall_ms`.
pub fn video_time(tl: &PlaybackTimeline, t_wall_ms: i64) -> f64 {
    tl.video_time_ms(t_wall_ms) as f64 / 1000.0
}

/// EDA values on the uniform video-time grid starting at video time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    pub grid_hz: f64,
    pub values: Vec<f64>,
}

impl GridSeries {
    pub fn into_eda_series(self, start_wall_ms: i64) -> Result<EdaSeries> {
        EdaSeries::new(start_wall_ms, self.grid_hz, self.values)
    }
}

/// Places the samples taken during play onto the video-time grid.
///
/// Grid point `k` takes the sample whose video time is nearest to `k / grid_hz`
/// (earlier sample on ties). When that sample is more than one grid step away
/// the previous grid value is carried forward; the first point always takes
/// the nearest sample.
///
/// The covered duration ends at the last stop, or for an open timeline one
/// nominal sample period after the last sample.
pub fn to_grid(eda: &EdaTrace, tl: &PlaybackTimeline, grid_hz: f64) -> Result<GridSeries> {
    if !(grid_hz.is_finite() && grid_hz > 0.0) {
        return Err(Error::param("grid_hz must be positive"));
    }
    eda.validate()?;

    let played: Vec<(i64, f64)> = eda
        .samples
        .iter()
        .filter(|s| tl.is_playing_at(s.t_ms))
        .map(|s| (tl.video_time_ms(s.t_ms), s.v))
        .collect();
    if played.is_empty() {
        return Err(Error::InsufficientData(
            "no EDA sample falls inside a play interval".into(),
        ));
    }

    let end_wall = match tl.events.last() {
        Some(last) if last.kind == PlaybackKind::Play => {
            let last_sample = eda.samples.last().map_or(last.t_wall_ms, |s| s.t_ms);
            (last_sample + eda.period_ms()).max(last.t_wall_ms)
        }
        Some(last) => last.t_wall_ms,
        None => unreachable!("timelines are never empty"),
    };
    let covered_ms = tl.video_time_ms(end_wall);
    let len = (covered_ms as f64 * grid_hz / 1000.0 - 1e-9).ceil().max(0.0) as usize;
    if len == 0 {
        return Err(Error::InsufficientData("no video time covered".into()));
    }

    let step_ms = 1000.0 / grid_hz;
    let mut values = Vec::with_capacity(len);
    for k in 0..len {
        let target = k as f64 * step_ms;
        let (dist, v) = nearest(&played, target);
        match values.last() {
            Some(&prev) if dist > step_ms => values.push(prev),
            _ => values.push(v),
        }
    }
    Ok(GridSeries { grid_hz, values })
}

/// Builds the timeline from `events` and returns the EDA on the video-time grid
/// as a uniform series stamped with the first play.
pub fn align_session(eda: &EdaTrace, events: &[PlaybackEvent], grid_hz: f64) -> Result<EdaSeries> {
    let timeline = build_timeline(events)?;
    let start = timeline.events[0].t_wall_ms;
    to_grid(eda, &timeline, grid_hz)?.into_eda_series(start)
}

/// Nearest entry by video time in a list sorted by video time; lowest index wins ties.
fn nearest(played: &[(i64, f64)], target: f64) -> (f64, f64) {
    let right = played.partition_point(|&(vt, _)| (vt as f64) < target);
    let mut best: Option<(f64, usize)> = None;
    if right > 0 {
        let left_vt = played[right - 1].0;
        let first = played.partition_point(|&(vt, _)| vt < left_vt);
        best = Some((target - left_vt as f64, first));
    }
    if right < played.len() {
        let d = played[right].0 as f64 - target;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, right));
        }
    }
    let (d, i) = best.expect("played is non-empty");
    (d, played[i].1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tl(events: &[PlaybackEvent]) -> PlaybackTimeline {
        build_timeline(events).unwrap()
    }

    #[test]
    fn open_timeline_is_valid() {
        let t = tl(&[PlaybackEvent::play(1000)]);
        assert!(t.is_open());
        assert_eq!(t.total_played_ms(), None);
    }

    #[test]
    fn rejects_bad_sequences() {
        let cases = [
            vec![PlaybackEvent::play(1000), PlaybackEvent::play(2000)],
            vec![PlaybackEvent::stop(1000)],
            vec![PlaybackEvent::play(2000), PlaybackEvent::stop(1000)],
            vec![PlaybackEvent::play(2000), PlaybackEvent::stop(2000)],
            vec![PlaybackEvent { t_wall_ms: 5, kind: PlaybackKind::Seek }],
            vec![PlaybackEvent::play(-1)],
            vec![],
        ];
        for events in cases {
            assert!(
                matches!(build_timeline(&events), Err(Error::ProtocolViolation(_))),
                "{events:?}"
            );
        }
    }

    #[test]
    fn total_played() {
        let t = tl(&[
            PlaybackEvent::play(1000),
            PlaybackEvent::stop(4000),
            PlaybackEvent::play(6000),
            PlaybackEvent::stop(9000),
        ]);
        assert_eq!(t.total_played_ms(), Some(6000));
    }

    #[test]
    fn video_time_examples() {
        let t = tl(&[PlaybackEvent::play(1000), PlaybackEvent::stop(4000), PlaybackEvent::play(6000)]);
        assert_eq!(video_time(&t, 7000), 4.0);
        assert_eq!(video_time(&t, 5000), 3.0);
        assert_eq!(video_time(&t, 500), 0.0);
    }

    #[test]
    fn duration_bound_caps_video_time() {
        let t = tl(&[PlaybackEvent::play(0)]).with_duration_bound(2.0).unwrap();
        assert_eq!(video_time(&t, 10_000), 2.0);
    }

    #[test]
    fn wall_time_inverts_video_time() {
        let t = tl(&[PlaybackEvent::play(1000), PlaybackEvent::stop(4000), PlaybackEvent::play(6000)]);
        assert_eq!(t.wall_time_at(0), Some(1000));
        assert_eq!(t.wall_time_at(2000), Some(3000));
        assert_eq!(t.wall_time_at(3000), Some(6000));
        assert_eq!(t.wall_time_at(4000), Some(7000));
        let closed = tl(&[PlaybackEvent::play(0), PlaybackEvent::stop(1000)]);
        assert_eq!(closed.wall_time_at(1500), None);
    }

    #[test]
    fn identity_alignment() {
        let values: Vec<f64> = (0..50).map(|i| f64::from(i) * 0.1).collect();
        let series = EdaSeries::new(10_000, 5.0, values.clone()).unwrap();
        let trace = EdaTrace::from(&series);
        let t = tl(&[PlaybackEvent::play(10_000)]);
        let grid = to_grid(&trace, &t, 5.0).unwrap();
        assert_eq!(grid.values, values);

        let closed = tl(&[PlaybackEvent::play(10_000), PlaybackEvent::stop(20_000)]);
        assert_eq!(to_grid(&trace, &closed, 5.0).unwrap().values, values);
    }

    #[test]
    fn pause_drops_samples() {
        // 10 s of samples, paused between 4 s and 6 s of wall time.
        let values: Vec<f64> = (0..50).map(f64::from).collect();
        let trace = EdaTrace::from(&EdaSeries::new(0, 5.0, values).unwrap());
        let t = tl(&[
            PlaybackEvent::play(0),
            PlaybackEvent::stop(4000),
            PlaybackEvent::play(6000),
            PlaybackEvent::stop(10_000),
        ]);
        let grid = to_grid(&trace, &t, 5.0).unwrap();
        assert_eq!(grid.values.len(), 40);
        let expected: Vec<f64> = (0..20).chain(30..50).map(f64::from).collect();
        assert_eq!(grid.values, expected);
    }

    #[test]
    fn no_samples_during_play() {
        let trace = EdaTrace::new(5.0, vec![EdaSample { t_ms: 0, v: 1.0 }]).unwrap();
        let t = tl(&[PlaybackEvent::play(1000), PlaybackEvent::stop(2000)]);
        assert!(matches!(to_grid(&trace, &t, 5.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn gap_carries_previous_value() {
        let samples = vec![
            EdaSample { t_ms: 0, v: 1.0 },
            EdaSample { t_ms: 200, v: 2.0 },
            EdaSample { t_ms: 1000, v: 5.0 },
        ];
        let trace = EdaTrace::new(5.0, samples).unwrap();
        let t = tl(&[PlaybackEvent::play(0), PlaybackEvent::stop(1200)]);
        let grid = to_grid(&trace, &t, 5.0).unwrap();
        // Point 3 (600 ms) is 400 ms from both neighbours, beyond one step.
        assert_eq!(grid.values, vec![1.0, 2.0, 2.0, 2.0, 5.0, 5.0]);
    }

    #[test]
    fn trace_rejects_regression() {
        let samples = vec![EdaSample { t_ms: 10, v: 1.0 }, EdaSample { t_ms: 5, v: 1.0 }];
        assert!(EdaTrace::new(5.0, samples).is_err());
    }
}
