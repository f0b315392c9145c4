//! Aggregate magnitude to feedback rendering.
//!
//! The aggregate value `a` (fraction of viewers in frisson) drives one of
//! three designs. At `a = 0` every design renders nothing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AggregateSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackDesign {
    AmbientLight,
    Icon,
    Vibration,
}

impl FeedbackDesign {
    pub const ALL: [FeedbackDesign; 3] = [
        FeedbackDesign::AmbientLight,
        FeedbackDesign::Icon,
        FeedbackDesign::Vibration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackDesign::AmbientLight => "ambient_light",
            FeedbackDesign::Icon => "icon",
            FeedbackDesign::Vibration => "vibration",
        }
    }
}

impl fmt::Display for FeedbackDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ambient_light" => Ok(FeedbackDesign::AmbientLight),
            "icon" => Ok(FeedbackDesign::Icon),
            "vibration" => Ok(FeedbackDesign::Vibration),
            other => Err(Error::param(format!(
                "unknown design {other:?} (expected ambient_light, icon or vibration)"
            ))),
        }
    }
}

/// Rendering constants. Only `duty_max` has a physical meaning (fraction of
/// the motor's maximum strength); the rest are presentation defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignParams {
    pub duty_max: f64,
    pub halo_min_px: f64,
    pub halo_span_px: f64,
    pub icon_visible_from: f64,
    pub icon_min_scale: f64,
    pub icon_scale_span: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self {
            duty_max: 0.7,
            halo_min_px: 8.0,
            halo_span_px: 72.0,
            icon_visible_from: 0.01,
            icon_min_scale: 0.4,
            icon_scale_span: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientState {
    pub opacity: f64,
    pub halo_radius_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IconState {
    pub visible: bool,
    /// Fraction of the configured maximum icon size.
    pub scale: f64,
}

impl DesignParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duty_max > 0.0 && self.duty_max <= 1.0) {
            return Err(Error::param("duty_max must be in (0, 1]"));
        }
        let nonneg = [
            self.halo_min_px,
            self.halo_span_px,
            self.icon_visible_from,
            self.icon_min_scale,
            self.icon_scale_span,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("design constants must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn vibration(&self, a: f64) -> Result<f64> {
        check_magnitude(a)?;
        Ok(self.duty_max * a)
    }

    pub fn ambient(&self, a: f64) -> Result<AmbientState> {
        check_magnitude(a)?;
        Ok(AmbientState {
            opacity: a,
            halo_radius_px: self.halo_min_px + self.halo_span_px * a,
        })
    }

    pub fn icon(&self, a: f64) -> Result<IconState> {
        check_magnitude(a)?;
        Ok(IconState {
            visible: a >= self.icon_visible_from,
            scale: self.icon_min_scale + self.icon_scale_span * a,
        })
    }
}

fn check_magnitude(a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::param(format!("magnitude {a} outside [0, 1]")))
    }
}

/// Motor duty fraction for magnitude `a`, capped at 70% of full strength.
pub fn map_vibration(a: f64) -> Result<f64> {
    DesignParams::default().vibration(a)
}

pub fn map_ambient(a: f64) -> Result<AmbientState> {
    DesignParams::default().ambient(a)
}

pub fn map_icon(a: f64) -> Result<IconState> {
    DesignParams::default().icon(a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackKeyframe {
    pub video_t_s: f64,
    pub magnitude: f64,
}

/// Run-length compressed step animation of the aggregate.
///
/// Each run of equal values becomes a keyframe at its first grid point, plus a
/// closing keyframe at its last grid point when the run is longer than one.
/// The design only labels the track; magnitudes are the aggregate values.
pub fn build_keyframes(agg: &AggregateSeries, _design: FeedbackDesign) -> Vec<FeedbackKeyframe> {
    let at = |k: usize, magnitude: f64| FeedbackKeyframe {
        video_t_s: k as f64 / agg.grid_hz,
        magnitude,
    };
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=agg.values.len() {
        if k == agg.values.len() || agg.values[k] != agg.values[start] {
            out.push(at(start, agg.values[start]));
            if k - 1 > start {
                out.push(at(k - 1, agg.values[start]));
            }
            start = k;
        }
    }
    out
}

/// Step reconstruction: the magnitude of the last keyframe at or before `video_t_s`.
pub fn step_value_at(keyframes: &[FeedbackKeyframe], video_t_s: f64) -> Option<f64> {
    let idx = keyframes.partition_point(|kf| kf.video_t_s <= video_t_s + 1e-9);
    idx.checked_sub(1).map(|i| keyframes[i].magnitude)
}

/// `values[min(floor(t * grid_hz), len - 1)]`.
pub fn magnitude_at(agg: &AggregateSeries, video_t_s: f64) -> Result<f64> {
    if video_t_s.is_nan() || video_t_s < 0.0 {
        return Err(Error::param(format!("video time {video_t_s} must be >= 0")));
    }
    if agg.values.is_empty() {
        return Err(Error::input("aggregate is empty"));
    }
    let idx = (video_t_s * agg.grid_hz + 1e-9).floor();
    let idx = if idx >= agg.values.len() as f64 {
        agg.values.len() - 1
    } else {
        idx as usize
    };
    Ok(agg.values[idx])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyframeTrack {
    design: FeedbackDesign,
    keyframes: Vec<(f64, f64)>,
}

/// `{"design":…,"keyframes":[[t,a],…]}` followed by a newline.
pub fn keyframes_to_json(design: FeedbackDesign, keyframes: &[FeedbackKeyframe]) -> Result<String> {
    let track = KeyframeTrack {
        design,
        keyframes: keyframes.iter().map(|k| (k.video_t_s, k.magnitude)).collect(),
    };
    let mut s = serde_json::to_string(&track).map_err(|e| Error::Encode(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn keyframes_from_json(text: &str) -> Result<(FeedbackDesign, Vec<FeedbackKeyframe>)> {
    let track: KeyframeTrack =
        serde_json::from_str(text).map_err(|e| Error::format(e.to_string()))?;
    let keyframes: Vec<FeedbackKeyframe> = track
        .keyframes
        .into_iter()
        .map(|(video_t_s, magnitude)| FeedbackKeyframe { video_t_s, magnitude })
        .collect();
    for (i, k) in keyframes.iter().enumerate() {
        if !(0.0..=1.0).contains(&k.magnitude) {
            return Err(Error::format(format!("keyframe {i} magnitude outside [0, 1]")));
        }
        if i > 0 && k.video_t_s <= keyframes[i - 1].video_t_s {
            return Err(Error::format(format!("keyframe {i} not after its predecessor")));
        }
    }
    Ok((track.design, keyframes))
}
