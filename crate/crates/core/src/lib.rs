//! Frisson sharing for online video.
//!
//! Electrodermal activity (EDA) recorded from viewers is aligned to the video
//! timeline, reduced to a binary frisson series per viewer, and averaged into a
//! per-video curve. That curve drives three low-distraction feedback designs
//! (ambient light, icon, vibration) synchronized with playback.
//!
//! * [`signal`] turns one aligned EDA series into a frisson series and averages viewers.
//! * [`align`] maps wall-clock samples onto the video-time grid using play/stop events.
//! * [`protocol`] is the line-delimited publish/subscribe wire format.
//! * [`server`] ingests live streams, finalizes sessions, and ticks vibration feedback.
//! * [`storage`] holds the on-disk text formats.
//! * [`feedback`] maps aggregate magnitude to each feedback design.
//! * [`simulator`] generates synthetic EDA with known events and scores detectors.

pub mod align;
pub mod error;
pub mod feedback;
pub mod protocol;
pub mod server;
pub mod signal;
pub mod simulator;
pub mod storage;

pub use align::{align_session, EdaSample, EdaTrace, PlaybackEvent, PlaybackKind, PlaybackTimeline};
pub use error::{Error, Result};
pub use feedback::{FeedbackDesign, FeedbackKeyframe};
pub use protocol::Frame;
pub use signal::{AggregateSeries, EdaSeries, FrissonSeries, PeakDescriptor, PipelineConfig};
