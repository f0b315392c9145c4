//! Brute-force oracles and seeded generators shared by the integration tests.
//! Oracles are written from the definitions, without reusing library internals.
#![allow(dead_code)]

use frisson_core::protocol::{ErrorCode, FeedbackSample, Payload, Topic};
use frisson_core::{AggregateSeries, EdaSample, Frame, PlaybackEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// (index, prominence) of each kept peak, O(n²).
pub fn brute_peaks(x: &[f64], min_prominence: f64, spacing: usize) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut cands = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if x[i - 1] >= x[i] {
            continue;
        }
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 >= n || x[j + 1] >= x[i] {
            continue;
        }
        let mut left_min = x[i];
        for k in (0..i).rev() {
            if x[k] > x[i] {
                break;
            }
            left_min = left_min.min(x[k]);
        }
        let mut right_min = x[i];
        for &v in &x[i + 1..] {
            if v > x[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        let prom = x[i] - left_min.max(right_min);
        if prom >= min_prominence {
            cands.push((i, prom));
        }
    }
    let mut order = cands.clone();
    order.sort_by(|a, b| x[b.0].partial_cmp(&x[a.0]).unwrap().then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for c in order {
        if kept.iter().all(|k| k.0.abs_diff(c.0) >= spacing) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|k| k.0);
    kept
}

/// Centered mean whose radius shrinks to fit at the edges.
pub fn brute_smooth(x: &[f64], window: usize) -> Vec<f64> {
    let h = window / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let r = h.min(i).min(n - 1 - i);
            let mut s = 0.0;
            for v in &x[i - r..=i + r] {
                s += v;
            }
            s / (2 * r + 1) as f64
        })
        .collect()
}

pub fn brute_detrend(x: &[f64], window: usize) -> Vec<f64> {
    let h = window / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            let mut s = 0.0;
            for v in &x[lo..=hi] {
                s += v;
            }
            x[i] - s / (hi - lo + 1) as f64
        })
        .collect()
}

/// Video milliseconds elapsed at wall time `t` by summing clipped play intervals.
pub fn brute_video_ms(events: &[PlaybackEvent], t: i64) -> i64 {
    let mut total = 0;
    let mut k = 0;
    while k < events.len() {
        let play = events[k].t_wall_ms;
        let stop = events.get(k + 1).map_or(i64::MAX, |e| e.t_wall_ms);
        if t > play {
            total += t.min(stop) - play;
        }
        k += 2;
    }
    total
}

pub fn brute_is_playing(events: &[PlaybackEvent], t: i64) -> bool {
    let mut k = 0;
    while k < events.len() {
        let play = events[k].t_wall_ms;
        let stop = events.get(k + 1).map_or(i64::MAX, |e| e.t_wall_ms);
        if play <= t && t < stop {
            return true;
        }
        k += 2;
    }
    false
}

/// Closed alternating play/stop sequence with random gaps.
pub fn random_events(r: &mut impl Rng, start: i64, intervals: usize) -> Vec<PlaybackEvent> {
    let mut t = start;
    let mut out = Vec::new();
    for _ in 0..intervals {
        out.push(PlaybackEvent::play(t));
        t += r.random_range(1_000..20_000);
        out.push(PlaybackEvent::stop(t));
        t += r.random_range(0..10_000);
    }
    out
}

/// Samples every 200 ms ±40 ms of jitter over `[start, end)`.
pub fn jittered_samples(r: &mut impl Rng, start: i64, end: i64) -> Vec<EdaSample> {
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let t = start + k * 200 + r.random_range(-40..=40);
        if start + k * 200 >= end {
            break;
        }
        let t = t.max(out.last().map_or(i64::MIN, |s: &EdaSample| s.t_ms));
        out.push(EdaSample { t_ms: t, v: r.random_range(-1.0..1.0) });
        k += 1;
    }
    out
}

fn ident(r: &mut impl Rng) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";
    let len = r.random_range(1..12);
    (0..len)
        .map(|_| ALPHABET[r.random_range(0..ALPHABET.len())] as char)
        .collect()
}

fn topic(r: &mut impl Rng) -> (Topic, Payload) {
    let t = r.random_range(-1_000_000_000_000i64..4_000_000_000_000);
    match r.random_range(0..3) {
        0 => (
            Topic::eda(&ident(r), &ident(r)),
            Payload::Eda(EdaSample { t_ms: t, v: r.random_range(-1e6..1e6) }),
        ),
        1 => {
            let e = if r.random_bool(0.5) { PlaybackEvent::play(t) } else { PlaybackEvent::stop(t) };
            (Topic::playback(&ident(r), &ident(r)), Payload::Playback(e))
        }
        _ => {
            let a: f64 = r.random_range(0.0..=1.0);
            (
                Topic::feedback(&ident(r)),
                Payload::Feedback(FeedbackSample { t_ms: t, a, duty: 0.7 * a }),
            )
        }
    }
}

/// Any valid frame of any op.
pub fn random_frame(r: &mut impl Rng) -> Frame {
    match r.random_range(0..6) {
        0 => {
            let (topic, payload) = topic(r);
            Frame::Pub { topic, payload }
        }
        1 => {
            let (topic, payload) = topic(r);
            Frame::Msg { topic, payload }
        }
        2 => {
            let root = ["eda", "playback", "feedback", "+"][r.random_range(0..4)];
            let mut p = root.to_string();
            for _ in 0..r.random_range(0..3) {
                p.push('/');
                p.push_str(&if r.random_bool(0.3) { "+".to_string() } else { ident(r) });
            }
            Frame::Sub { pattern: p }
        }
        3 => Frame::GetAggregate { video: ident(r) },
        4 => {
            let n = r.random_range(1..30usize);
            let len = r.random_range(0..200);
            let values = (0..len).map(|_| r.random_range(0..=n) as f64 / n as f64).collect();
            Frame::Aggregate(AggregateSeries::new(ident(r), 5.0, n, values).unwrap())
        }
        _ => {
            let codes = [
                ErrorCode::ParseError,
                ErrorCode::ProtocolViolation,
                ErrorCode::TsRegression,
                ErrorCode::NotFound,
                ErrorCode::InsufficientData,
                ErrorCode::Internal,
            ];
            let msg: String = (0..r.random_range(0..40))
                .map(|_| char::from_u32(r.random_range(0x20..0x3000)).unwrap_or('?'))
                .collect();
            Frame::error(codes[r.random_range(0..codes.len())], msg)
        }
    }
}

/// Random series with plateaus, ties and both shallow and deep excursions, scaled to [0, 1].
pub fn random_normalized(r: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(len);
    let mut level: f64 = 0.0;
    let quantum = [0.0, 0.05, 0.25][r.random_range(0..3)];
    for _ in 0..len {
        level += r.random_range(-1.0..1.0);
        if r.random_bool(0.02) {
            level += r.random_range(3.0..10.0);
        }
        let v = if quantum > 0.0 { (level / quantum).round() * quantum } else { level };
        x.push(v);
        if r.random_bool(0.1) {
            x.push(v);
        }
    }
    x.truncate(len);
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        x.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; len]
    }
}
