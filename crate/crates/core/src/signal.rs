//! EDA-to-frisson pipeline.
//!
//! A session's EDA series (already on the video-time grid) is smoothed, has its
//! tonic baseline removed, is normalized to `[0, 1]`, and then reduced to a
//! binary frisson indicator by prominence-based peak detection and fixed-width
//! quantization. [`aggregate`] averages the indicators of many viewers.
//!
//! Every function here is pure.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when comparing configured and series sample rates.
const RATE_EPS: f64 = 1e-9;

/// Guards `floor`/`round` of products like `2.5 s × 5 Hz` against representation error.
const INDEX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sample_rate_hz: f64,
    /// Width of the centered noise smoother. Must be odd.
    pub smooth_window_samples: usize,
    pub baseline_window_samples: usize,
    /// Minimum distance between two kept peaks.
    pub peak_min_distance_s: f64,
    /// Threshold on the normalized (0..1) signal.
    pub peak_min_prominence: f64,
    /// Each peak marks `±quantize_halfwidth_s` around it as frisson.
    pub quantize_halfwidth_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 5.0,
            smooth_window_samples: 5,
            baseline_window_samples: 50,
            peak_min_distance_s: 5.0,
            peak_min_prominence: 0.6,
            quantize_halfwidth_s: 2.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::param("sample_rate_hz must be positive"));
        }
        if self.smooth_window_samples == 0 || self.smooth_window_samples.is_multiple_of(2) {
            return Err(Error::param("smooth_window_samples must be odd and >= 1"));
        }
        if self.baseline_window_samples == 0 {
            return Err(Error::param("baseline_window_samples must be >= 1"));
        }
        if !(self.peak_min_prominence > 0.0 && self.peak_min_prominence <= 1.0) {
            return Err(Error::param("peak_min_prominence must be in (0, 1]"));
        }
        if !(self.peak_min_distance_s.is_finite() && self.peak_min_distance_s > 0.0) {
            return Err(Error::param("peak_min_distance_s must be positive"));
        }
        if !(self.quantize_halfwidth_s.is_finite() && self.quantize_halfwidth_s >= 0.0) {
            return Err(Error::param("quantize_halfwidth_s must be >= 0"));
        }
        Ok(())
    }

    /// Minimum peak spacing in samples.
    pub fn peak_spacing_samples(&self) -> usize {
        (self.peak_min_distance_s * self.sample_rate_hz).round() as usize
    }

    /// Quantization half-width in samples.
    pub fn quantize_halfwidth_samples(&self) -> usize {
        (self.quantize_halfwidth_s * self.sample_rate_hz + INDEX_EPS).floor() as usize
    }
}

/// Uniformly sampled skin conductance anchored at a wall-clock start.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaSeries {
    pub start_wall_ms: i64,
    pub sample_rate_hz: f64,
    pub values: Vec<f64>,
}

impl EdaSeries {
    pub fn new(start_wall_ms: i64, sample_rate_hz: f64, values: Vec<f64>) -> Result<Self> {
        let series = Self {
            start_wall_ms,
            sample_rate_hz,
            values,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::param("sample_rate_hz must be positive"));
        }
        if self.values.is_empty() {
            return Err(Error::input("EDA series is empty"));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            start_wall_ms: self.start_wall_ms,
            sample_rate_hz: self.sample_rate_hz,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDescriptor {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
    pub left_base: usize,
    pub right_base: usize,
}

/// One viewer's binary frisson indicator on the video-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrissonSeries {
    pub grid_hz: f64,
    pub values: Vec<u8>,
}

impl FrissonSeries {
    pub fn new(grid_hz: f64, values: Vec<u8>) -> Result<Self> {
        if !(grid_hz.is_finite() && grid_hz > 0.0) {
            return Err(Error::param("grid_hz must be positive"));
        }
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(Error::input(format!("non-binary frisson value at index {i}")));
        }
        Ok(Self { grid_hz, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of maximal runs of ones.
    pub fn active_runs(&self) -> usize {
        let mut runs = 0;
        let mut prev = 0u8;
        for &v in &self.values {
            if v == 1 && prev == 0 {
                runs += 1;
            }
            prev = v;
        }
        runs
    }
}

/// Fraction of viewers in frisson at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub video_id: String,
    pub grid_hz: f64,
    pub n_viewers: usize,
    pub values: Vec<f64>,
}

impl AggregateSeries {
    /// Checks the structural invariants: positive rate and viewer count, values in `[0, 1]`.
    pub fn new(video_id: String, grid_hz: f64, n_viewers: usize, values: Vec<f64>) -> Result<Self> {
        if video_id.is_empty() {
            return Err(Error::input("video_id is empty"));
        }
        if !(grid_hz.is_finite() && grid_hz > 0.0) {
            return Err(Error::param("grid_hz must be positive"));
        }
        if n_viewers == 0 {
            return Err(Error::input("n_viewers must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input(format!(
                "aggregate value {} at index {i} outside [0, 1]",
                values[i]
            )));
        }
        Ok(Self {
            video_id,
            grid_hz,
            n_viewers,
            values,
        })
    }

    /// True when every value is `k / n_viewers` for an integer `k`, within `tol`.
    pub fn is_mean_of_binaries(&self, tol: f64) -> bool {
        let n = self.n_viewers as f64;
        self.values.iter().all(|v| {
            let scaled = v * n;
            (scaled - scaled.round()).abs() <= tol
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.grid_hz
    }
}

/// Centered moving average. Near the edges the window shrinks symmetrically
/// to the samples available on both sides.
pub fn smooth(series: &EdaSeries, window: usize) -> Result<EdaSeries> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::param(format!("smoothing window {window} must be odd and >= 1")));
    }
    let n = series.len();
    if window > n {
        return Err(Error::param(format!(
            "smoothing window {window} exceeds series length {n}"
        )));
    }
    let half = window / 2;
    let x = &series.values;
    let out = (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            mean(&x[i - r..=i + r])
        })
        .collect();
    Ok(series.with_values(out))
}

/// Subtracts a centered moving-average baseline. The window spans
/// `[i - window/2, i + window/2]`, truncated at the series bounds.
pub fn remove_baseline(series: &EdaSeries, window: usize) -> Result<EdaSeries> {
    if window == 0 {
        return Err(Error::param("baseline window must be >= 1"));
    }
    if series.is_empty() {
        return Err(Error::input("EDA series is empty"));
    }
    let n = series.len();
    let half = window / 2;
    let x = &series.values;
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            x[i] - mean(&x[lo..=hi])
        })
        .collect();
    Ok(series.with_values(out))
}

/// Min-max scaling to `[0, 1]`. A constant series maps to all zeros.
pub fn normalize(series: &EdaSeries) -> Result<EdaSeries> {
    if series.is_empty() {
        return Err(Error::input("EDA series is empty"));
    }
    if let Some(i) = series.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite sample at index {i}")));
    }
    let (lo, hi) = series
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let out = if range > 0.0 {
        series
            .values
            .iter()
            .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; series.len()]
    };
    Ok(series.with_values(out))
}

/// Prominence-based peak detection with greedy minimum-distance pruning.
///
/// Candidates are strict local maxima (leftmost sample of a flat top). A
/// candidate's prominence is its height minus the higher of the two minima
/// separating it from strictly taller terrain (or the series ends). Candidates
/// under `peak_min_prominence` are dropped, then the rest are visited tallest
/// first (lower index wins ties) and kept only if no kept peak lies closer than
/// the configured spacing.
pub fn detect_peaks(series: &EdaSeries, cfg: &PipelineConfig) -> Result<Vec<PeakDescriptor>> {
    cfg.validate()?;
    series.validate()?;
    let x = &series.values;
    let candidates = local_maxima(x);
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    let prev_higher = nearest_strictly_higher(x, Direction::Left);
    let next_higher = nearest_strictly_higher(x, Direction::Right);
    let mins = RangeArgMin::new(x);

    let mut peaks: Vec<PeakDescriptor> = candidates
        .into_iter()
        .map(|i| {
            let left_start = prev_higher[i].map_or(0, |k| k + 1);
            let right_end = next_higher[i].map_or(x.len() - 1, |k| k - 1);
            let left_base = mins.query(left_start, i, TieBreak::Right);
            let right_base = mins.query(i, right_end, TieBreak::Left);
            PeakDescriptor {
                index: i,
                height: x[i],
                prominence: x[i] - x[left_base].max(x[right_base]),
                left_base,
                right_base,
            }
        })
        .filter(|p| p.prominence >= cfg.peak_min_prominence)
        .collect();

    let spacing = cfg.peak_spacing_samples();
    if spacing > 1 && peaks.len() > 1 {
        peaks.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
        let mut kept: BTreeSet<usize> = BTreeSet::new();
        peaks.retain(|p| {
            let lo = p.index.saturating_sub(spacing - 1);
            let clear = kept.range(lo..p.index + spacing).next().is_none();
            if clear {
                kept.insert(p.index);
            }
            clear
        });
        peaks.sort_by_key(|p| p.index);
    }
    Ok(peaks)
}

/// Marks `±h` samples around each peak as frisson, clipped to the series and merged.
pub fn quantize(length: usize, peaks: &[PeakDescriptor], cfg: &PipelineConfig) -> Result<FrissonSeries> {
    cfg.validate()?;
    let h = cfg.quantize_halfwidth_samples();
    let mut values = vec![0u8; length];
    for p in peaks {
        if p.index >= length {
            return Err(Error::input(format!(
                "peak index {} out of range for length {length}",
                p.index
            )));
        }
        let lo = p.index.saturating_sub(h);
        let hi = (p.index + h).min(length - 1);
        values[lo..=hi].fill(1);
    }
    FrissonSeries::new(cfg.sample_rate_hz, values)
}

/// Intermediate products of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub normalized: EdaSeries,
    pub peaks: Vec<PeakDescriptor>,
    pub frisson: FrissonSeries,
}

pub fn run_pipeline(series: &EdaSeries, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    series.validate()?;
    if (series.sample_rate_hz - cfg.sample_rate_hz).abs() > RATE_EPS {
        return Err(Error::param(format!(
            "series sampled at {} Hz but pipeline configured for {} Hz",
            series.sample_rate_hz, cfg.sample_rate_hz
        )));
    }
    let smoothed = smooth(series, cfg.smooth_window_samples)?;
    let detrended = remove_baseline(&smoothed, cfg.baseline_window_samples)?;
    let normalized = normalize(&detrended)?;
    let peaks = detect_peaks(&normalized, cfg)?;
    let frisson = quantize(normalized.len(), &peaks, cfg)?;
    Ok(PipelineOutput {
        normalized,
        peaks,
        frisson,
    })
}

/// smooth → remove_baseline → normalize → detect_peaks → quantize.
pub fn process_session(series: &EdaSeries, cfg: &PipelineConfig) -> Result<FrissonSeries> {
    run_pipeline(series, cfg).map(|out| out.frisson)
}

/// Per-grid-point mean of binary series.
pub fn aggregate(video_id: &str, series_list: &[FrissonSeries]) -> Result<AggregateSeries> {
    let first = series_list
        .first()
        .ok_or_else(|| Error::input("no frisson series to aggregate"))?;
    for (i, s) in series_list.iter().enumerate().skip(1) {
        if s.grid_hz != first.grid_hz {
            return Err(Error::ShapeMismatch(format!(
                "series {i} has grid {} Hz, expected {} Hz",
                s.grid_hz, first.grid_hz
            )));
        }
        if s.len() != first.len() {
            return Err(Error::ShapeMismatch(format!(
                "series {i} has length {}, expected {}",
                s.len(),
                first.len()
            )));
        }
    }
    let n = series_list.len();
    let mut counts = vec![0u32; first.len()];
    for s in series_list {
        for (c, &v) in counts.iter_mut().zip(&s.values) {
            *c += u32::from(v);
        }
    }
    let values = counts.into_iter().map(|c| f64::from(c) / n as f64).collect();
    AggregateSeries::new(video_id.to_string(), first.grid_hz, n, values)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Leftmost index of every flat-topped or pointed local maximum that has a
/// strictly lower neighbour on both sides.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Direction {
    Left,
    Right,
}

/// For each index, the nearest index in `dir` whose value is strictly greater.
fn nearest_strictly_higher(x: &[f64], dir: Direction) -> Vec<Option<usize>> {
    let n = x.len();
    let mut out = vec![None; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut visit = |i: usize| {
        while let Some(&top) = stack.last() {
            if x[top] <= x[i] {
                stack.pop();
            } else {
                break;
            }
        }
        out[i] = stack.last().copied();
        stack.push(i);
    };
    match dir {
        Direction::Left => (0..n).for_each(&mut visit),
        Direction::Right => (0..n).rev().for_each(&mut visit),
    }
    out
}

#[derive(Clone, Copy)]
enum TieBreak {
    Left,
    Right,
}

/// Sparse tables answering argmin over inclusive ranges in O(1).
struct RangeArgMin<'a> {
    x: &'a [f64],
    prefer_left: Vec<Vec<usize>>,
    prefer_right: Vec<Vec<usize>>,
}

impl<'a> RangeArgMin<'a> {
    fn new(x: &'a [f64]) -> Self {
        let build = |tie: TieBreak| {
            let n = x.len();
            let mut levels = vec![(0..n).collect::<Vec<_>>()];
            let mut width = 1;
            while 2 * width <= n {
                let prev = levels.last().unwrap();
                let next = (0..=n - 2 * width)
                    .map(|i| pick(x, prev[i], prev[i + width], tie))
                    .collect();
                levels.push(next);
                width *= 2;
            }
            levels
        };
        Self {
            x,
            prefer_left: build(TieBreak::Left),
            prefer_right: build(TieBreak::Right),
        }
    }

    fn query(&self, lo: usize, hi: usize, tie: TieBreak) -> usize {
        let table = match tie {
            TieBreak::Left => &self.prefer_left,
            TieBreak::Right => &self.prefer_right,
        };
        let len = hi - lo + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let a = table[level][lo];
        let b = table[level][hi + 1 - (1 << level)];
        pick(self.x, a, b, tie)
    }
}

fn pick(x: &[f64], a: usize, b: usize, tie: TieBreak) -> usize {
    let (l, r) = if a <= b { (a, b) } else { (b, a) };
    match x[l].total_cmp(&x[r]) {
        Ordering::Less => l,
        Ordering::Greater => r,
        Ordering::Equal => match tie {
            TieBreak::Left => l,
            TieBreak::Right => r,
        },
    }
}
