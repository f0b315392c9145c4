//! Fixtures shared by the criterion benches.

use frisson_core::align::{build_timeline, PlaybackTimeline};
use frisson_core::protocol::{Payload, Topic};
use frisson_core::simulator::{simulate_cohort, CohortSpec, SimParticipant};
use frisson_core::{EdaTrace, Frame};

/// One simulated viewer of a video `duration_s` long at 5 Hz.
pub fn viewer(duration_s: f64) -> SimParticipant {
    let spec = CohortSpec { participants: 1, duration_s, ..CohortSpec::default() };
    simulate_cohort(&spec).expect("valid cohort spec").remove(0)
}

pub fn trace_and_timeline(p: &SimParticipant) -> (EdaTrace, PlaybackTimeline) {
    (EdaTrace::from(&p.series), build_timeline(&p.events).expect("simulated events alternate"))
}

/// The publish frames a sensor client sends for one viewer.
pub fn eda_frames(p: &SimParticipant) -> Vec<Frame> {
    EdaTrace::from(&p.series)
        .samples
        .into_iter()
        .map(|s| Frame::Pub { topic: Topic::eda("bench", &p.participant_id), payload: Payload::Eda(s) })
        .collect()
}
