mod common;

use common::*;
use frisson_core::align::{build_timeline, to_grid, video_time};
use frisson_core::signal::{aggregate, detect_peaks, normalize, remove_baseline, smooth};
use frisson_core::{EdaSeries, EdaTrace, FrissonSeries, PipelineConfig};
use rand::Rng;

fn series(values: Vec<f64>) -> EdaSeries {
    EdaSeries::new(0, 5.0, values).unwrap()
}

#[test]
fn peaks_match_brute_force_across_thresholds_and_spacings() {
    let mut r = rng(11);
    for case in 0..300 {
        let len = r.random_range(3..800);
        let x = random_normalized(&mut r, len);
        let cfg = PipelineConfig {
            peak_min_prominence: [0.6, 0.2, 0.05, 1e-6][case % 4],
            peak_min_distance_s: [5.0, 0.2, 1.0, 12.0][case % 4 / 2 + case % 2],
            ..PipelineConfig::default()
        };
        let got = detect_peaks(&series(x.clone()), &cfg).unwrap();
        let want = brute_peaks(&x, cfg.peak_min_prominence, cfg.peak_spacing_samples());
        assert_eq!(
            got.iter().map(|p| p.index).collect::<Vec<_>>(),
            want.iter().map(|p| p.0).collect::<Vec<_>>(),
            "case {case}"
        );
        for (g, w) in got.iter().zip(&want) {
            assert!((g.prominence - w.1).abs() < 1e-9);
            assert_eq!(g.height, x[g.index]);
            assert!(g.left_base <= g.index && g.index <= g.right_base);
        }
    }
}

#[test]
fn peaks_spacing_is_respected() {
    let mut r = rng(12);
    let cfg = PipelineConfig { peak_min_prominence: 0.01, ..PipelineConfig::default() };
    for _ in 0..100 {
        let x = random_normalized(&mut r, 1000);
        let peaks = detect_peaks(&series(x), &cfg).unwrap();
        for w in peaks.windows(2) {
            assert!(w[1].index - w[0].index >= cfg.peak_spacing_samples());
        }
    }
}

#[test]
fn two_close_peaks_keep_the_taller() {
    let mut x = vec![0.0; 60];
    x[20] = 1.0;
    x[30] = 0.9;
    let got = detect_peaks(&series(x.clone()), &PipelineConfig::default()).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].index, 20);
    assert_eq!(brute_peaks(&x, 0.6, 25), vec![(20, 1.0)]);
}

#[test]
fn smooth_matches_windowed_mean() {
    let mut r = rng(13);
    for window in [1, 3, 5, 7, 21] {
        let x: Vec<f64> = (0..200).map(|_| r.random_range(-5.0..5.0)).collect();
        let got = smooth(&series(x.clone()), window).unwrap();
        for (g, w) in got.values.iter().zip(brute_smooth(&x, window)) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn baseline_matches_truncated_window_mean() {
    let mut r = rng(14);
    for window in [1, 2, 7, 50, 51, 400] {
        let x: Vec<f64> = (0..300).map(|_| r.random_range(-5.0..5.0)).collect();
        let got = remove_baseline(&series(x.clone()), window).unwrap();
        for (g, w) in got.values.iter().zip(brute_detrend(&x, window)) {
            assert!((g - w).abs() < 1e-12);
        }
    }
    let spike = [0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0];
    let got = remove_baseline(&series(spike.to_vec()), 7).unwrap();
    assert!((got.values[3] - (10.0 - 10.0 / 7.0)).abs() < 1e-12);
}

#[test]
fn normalize_preserves_order() {
    let mut r = rng(15);
    let x: Vec<f64> = (0..500).map(|_| r.random_range(-100.0..100.0)).collect();
    let y = normalize(&series(x.clone())).unwrap().values;
    assert_eq!(y.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(y.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    let mut by_x: Vec<usize> = (0..x.len()).collect();
    by_x.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    for w in by_x.windows(2) {
        assert!(y[w[0]] <= y[w[1]]);
    }
}

#[test]
fn aggregate_matches_column_sums() {
    let mut r = rng(16);
    let rows: Vec<FrissonSeries> = (0..20)
        .map(|_| FrissonSeries::new(5.0, (0..1500).map(|_| r.random_range(0..=1u8)).collect()).unwrap())
        .collect();
    let agg = aggregate("v", &rows).unwrap();
    for k in 0..1500 {
        let mut sum = 0.0;
        for row in &rows {
            sum += f64::from(row.values[k]);
        }
        assert!((agg.values[k] - sum / 20.0).abs() < 1e-12);
    }
    assert!(agg.is_mean_of_binaries(1e-9));
}

#[test]
fn video_time_matches_interval_sum() {
    let mut r = rng(17);
    for _ in 0..200 {
        let n = r.random_range(1..6);
        let events = random_events(&mut r, 1_000_000, n);
        let tl = build_timeline(&events).unwrap();
        let end = events.last().unwrap().t_wall_ms + 5_000;
        for _ in 0..100 {
            let t = r.random_range(0..end);
            assert_eq!(video_time(&tl, t), brute_video_ms(&events, t) as f64 / 1000.0);
            assert_eq!(tl.is_playing_at(t), brute_is_playing(&events, t));
        }
    }
}

/// Exhaustive nearest-sample search with carry-forward for gaps wider than one step.
fn brute_grid(samples: &[frisson_core::EdaSample], events: &[frisson_core::PlaybackEvent], len: usize) -> Vec<f64> {
    let played: Vec<(i64, f64)> = samples
        .iter()
        .filter(|s| brute_is_playing(events, s.t_ms))
        .map(|s| (brute_video_ms(events, s.t_ms), s.v))
        .collect();
    let mut out: Vec<f64> = Vec::new();
    for k in 0..len {
        let target = k as f64 * 200.0;
        let mut best = 0;
        for (i, p) in played.iter().enumerate() {
            if (p.0 as f64 - target).abs() < (played[best].0 as f64 - target).abs() {
                best = i;
            }
        }
        let dist = (played[best].0 as f64 - target).abs();
        match out.last() {
            Some(&prev) if dist > 200.0 => out.push(prev),
            _ => out.push(played[best].1),
        }
    }
    out
}

#[test]
fn to_grid_matches_exhaustive_nearest() {
    let mut r = rng(18);
    for _ in 0..100 {
        let n = r.random_range(1..5);
        let events = random_events(&mut r, 10_000, n);
        let end = events.last().unwrap().t_wall_ms;
        let samples = jittered_samples(&mut r, 9_000, end + 1_000);
        let trace = EdaTrace::new(5.0, samples.clone()).unwrap();
        let tl = build_timeline(&events).unwrap();
        let grid = to_grid(&trace, &tl, 5.0).unwrap();
        let total = brute_video_ms(&events, end);
        assert_eq!(grid.values.len(), (total as f64 / 200.0).ceil() as usize);
        assert_eq!(grid.values, brute_grid(&samples, &events, grid.values.len()));
    }
}

#[test]
fn to_grid_is_identity_on_uninterrupted_regular_sampling() {
    let mut r = rng(19);
    let values: Vec<f64> = (0..500).map(|_| r.random_range(0.0..1.0)).collect();
    let s = EdaSeries::new(1_700_000_000_000, 5.0, values.clone()).unwrap();
    let tl = build_timeline(&[frisson_core::PlaybackEvent::play(1_700_000_000_000)]).unwrap();
    let grid = to_grid(&EdaTrace::from(&s), &tl, 5.0).unwrap();
    assert_eq!(grid.values, values);
}
