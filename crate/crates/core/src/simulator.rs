//! Synthetic EDA with known frisson events, and a detector scorer.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`).
//! A uniform draw is `(next_u64() >> 11) * 2^-53`; a Gaussian draw consumes two
//! uniforms `u1, u2` and returns `sqrt(-2 ln(1 - u1)) * cos(2π u2)` (Box-Muller,
//! cosine branch only). Keeping to this recipe makes fixtures reproducible in
//! other languages.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::PlaybackEvent;
use crate::error::{Error, Result};
use crate::signal::EdaSeries;

/// First wall-clock timestamp used by [`simulate_cohort`].
pub const DEFAULT_START_WALL_MS: i64 = 1_700_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrParams {
    pub amplitude: f64,
    pub rise_tau_s: f64,
    pub decay_tau_s: f64,
}

impl Default for ScrParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            rise_tau_s: 0.75,
            decay_tau_s: 2.0,
        }
    }
}

impl ScrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::param("SCR amplitude must be positive"));
        }
        if !(self.rise_tau_s > 0.0 && self.rise_tau_s < self.decay_tau_s && self.decay_tau_s.is_finite()) {
            return Err(Error::param("SCR time constants need 0 < rise < decay"));
        }
        Ok(())
    }

    /// Time after onset at which the kernel peaks.
    pub fn peak_time_s(&self) -> f64 {
        let (r, d) = (self.rise_tau_s, self.decay_tau_s);
        (d / r).ln() * r * d / (d - r)
    }
}

/// Difference-of-exponentials response scaled so its peak equals the amplitude.
#[derive(Debug, Clone, Copy)]
pub struct ScrKernel {
    params: ScrParams,
    norm: f64,
}

impl ScrKernel {
    pub fn new(params: ScrParams) -> Result<Self> {
        params.validate()?;
        let t_peak = params.peak_time_s();
        let norm = bracket(&params, t_peak);
        Ok(Self { params, norm })
    }

    pub fn eval(&self, t_since_onset_s: f64) -> f64 {
        if t_since_onset_s < 0.0 {
            return 0.0;
        }
        self.params.amplitude * (bracket(&self.params, t_since_onset_s) / self.norm)
    }
}

fn bracket(p: &ScrParams, t: f64) -> f64 {
    (-t / p.decay_tau_s).exp() - (-t / p.rise_tau_s).exp()
}

pub fn scr_kernel(t_since_onset_s: f64, params: &ScrParams) -> Result<f64> {
    Ok(ScrKernel::new(*params)?.eval(t_since_onset_s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub event_times_s: Vec<f64>,
    pub scr: ScrParams,
    /// Amplitude of one slow sinusoid whose period is the whole duration.
    pub drift_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub start_wall_ms: i64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            duration_s: 300.0,
            sample_rate_hz: 5.0,
            event_times_s: Vec::new(),
            scr: ScrParams::default(),
            drift_amplitude: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            start_wall_ms: DEFAULT_START_WALL_MS,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::param("duration must be positive"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::param("sample rate must be positive"));
        }
        if let Some(t) = self
            .event_times_s
            .iter()
            .find(|t| !(0.0..self.duration_s).contains(*t))
        {
            return Err(Error::param(format!("event time {t} outside [0, duration)")));
        }
        if !self.drift_amplitude.is_finite() {
            return Err(Error::param("drift amplitude must be finite"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::param("noise sigma must be >= 0"));
        }
        self.scr.validate()
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Portable seeded source following the recipe in the module docs.
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// Drift + SCR responses + Gaussian noise; returns the series and the event onsets.
pub fn generate(spec: &SimSpec) -> Result<(EdaSeries, Vec<f64>)> {
    spec.validate()?;
    let kernel = ScrKernel::new(spec.scr)?;
    let n = spec.n_samples();
    if n == 0 {
        return Err(Error::param("duration shorter than one sample"));
    }
    let mut rng = SimRng::new(spec.seed);
    let mut truth = spec.event_times_s.clone();
    truth.sort_by(f64::total_cmp);
    // Responses are negligible after 20 decay constants.
    let horizon = 20.0 * spec.scr.decay_tau_s;

    let values = (0..n)
        .map(|i| {
            let t = i as f64 / spec.sample_rate_hz;
            let mut v = spec.drift_amplitude * (2.0 * PI * t / spec.duration_s).sin();
            for &onset in &truth {
                let dt = t - onset;
                if (0.0..horizon).contains(&dt) {
                    v += kernel.eval(dt);
                }
            }
            if spec.noise_sigma > 0.0 {
                v += spec.noise_sigma * rng.gaussian();
            }
            v
        })
        .collect();
    Ok((EdaSeries::new(spec.start_wall_ms, spec.sample_rate_hz, values)?, truth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub matches: usize,
}

/// Greedy one-to-one matching in increasing time within `±tol_s`.
/// An empty detection list has precision 1; an empty truth list has recall 1.
pub fn evaluate(detected: &[f64], truth: &[f64], tol_s: f64) -> EvalResult {
    let mut d = detected.to_vec();
    let mut t = truth.to_vec();
    d.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    let (mut i, mut j, mut matches) = (0, 0, 0);
    while i < d.len() && j < t.len() {
        if (d[i] - t[j]).abs() <= tol_s {
            matches += 1;
            i += 1;
            j += 1;
        } else if d[i] < t[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let ratio = |m: usize, n: usize| if n == 0 { 1.0 } else { m as f64 / n as f64 };
    EvalResult {
        precision: ratio(matches, d.len()),
        recall: ratio(matches, t.len()),
        matches,
    }
}

/// `count` sorted times in `[lo, hi]` with consecutive gaps of at least `min_gap`.
pub fn spaced_times(rng: &mut SimRng, count: usize, lo: f64, hi: f64, min_gap: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let slack = hi - lo - (count - 1) as f64 * min_gap;
    if slack.is_nan() || slack < 0.0 {
        return Err(Error::param(format!(
            "cannot fit {count} events {min_gap} s apart in [{lo}, {hi}]"
        )));
    }
    let mut offsets: Vec<f64> = (0..count).map(|_| rng.uniform() * slack).collect();
    offsets.sort_by(f64::total_cmp);
    Ok(offsets
        .into_iter()
        .enumerate()
        .map(|(i, o)| lo + o + i as f64 * min_gap)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub participants: usize,
    pub duration_s: f64,
    pub events_per_participant: usize,
    pub min_gap_s: f64,
    pub sample_rate_hz: f64,
    pub scr: ScrParams,
    /// Noise and drift as fractions of the SCR amplitude.
    pub noise_frac: f64,
    pub drift_frac: f64,
    /// Per-participant jitter (uniform ±) around the shared moments.
    pub jitter_s: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            participants: 20,
            duration_s: 300.0,
            events_per_participant: 8,
            min_gap_s: 20.0,
            sample_rate_hz: 5.0,
            scr: ScrParams::default(),
            noise_frac: 0.02,
            drift_frac: 0.5,
            jitter_s: 0.5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimParticipant {
    pub participant_id: String,
    pub series: EdaSeries,
    pub truth: Vec<f64>,
    /// One uninterrupted play over the whole series.
    pub events: Vec<PlaybackEvent>,
}

/// Viewers of one video. A pool of shared moments is drawn once; each viewer
/// reacts to a random subset of them, jittered, so the aggregate has structure.
/// Viewers start watching at staggered wall times.
pub fn simulate_cohort(spec: &CohortSpec) -> Result<Vec<SimParticipant>> {
    if spec.participants == 0 {
        return Err(Error::param("need at least one participant"));
    }
    let margin = (spec.duration_s * 0.05).clamp(0.0, 10.0).max(spec.jitter_s);
    let (lo, hi) = (margin, spec.duration_s - margin);
    let pool_gap = spec.min_gap_s + 2.0 * spec.jitter_s;
    let k = spec.events_per_participant;
    let capacity = if hi > lo { ((hi - lo) / pool_gap).floor() as usize + 1 } else { 1 };
    if k > capacity {
        return Err(Error::param(format!(
            "{k} events {} s apart do not fit in {} s",
            spec.min_gap_s, spec.duration_s
        )));
    }
    let pool_size = (2 * k).min(capacity);

    let mut master = SimRng::new(spec.seed);
    let pool = spaced_times(&mut master, pool_size, lo, hi, pool_gap)?;
    let width = spec.participants.to_string().len().max(2);
    let session_ms = (spec.duration_s * 1000.0).round() as i64;

    (0..spec.participants)
        .map(|i| {
            let seed = master.next_u64();
            let mut rng = SimRng::new(seed);
            let mut chosen: Vec<usize> = (0..pool_size).collect();
            // Partial Fisher-Yates for a random k-subset.
            for j in 0..k {
                let pick = j + rng.below(pool_size - j);
                chosen.swap(j, pick);
            }
            let mut times: Vec<f64> = chosen[..k]
                .iter()
                .map(|&p| pool[p] + (2.0 * rng.uniform() - 1.0) * spec.jitter_s)
                .collect();
            times.sort_by(f64::total_cmp);

            let start_wall_ms = DEFAULT_START_WALL_MS + i as i64 * (session_ms + 60_000);
            let sim = SimSpec {
                duration_s: spec.duration_s,
                sample_rate_hz: spec.sample_rate_hz,
                event_times_s: times,
                scr: spec.scr,
                drift_amplitude: spec.drift_frac * spec.scr.amplitude,
                noise_sigma: spec.noise_frac * spec.scr.amplitude,
                seed: rng.next_u64(),
                start_wall_ms,
            };
            let (series, truth) = generate(&sim)?;
            let end_ms = start_wall_ms
                + (series.len() as f64 * 1000.0 / spec.sample_rate_hz).round() as i64;
            Ok(SimParticipant {
                participant_id: format!("p{:0width$}", i + 1),
                series,
                truth,
                events: vec![PlaybackEvent::play(start_wall_ms), PlaybackEvent::stop(end_ms)],
            })
        })
        .collect()
}
