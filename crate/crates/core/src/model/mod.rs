//! In-memory data model shared by flow, warping, fusion, metrics and I/O.

mod confidence;
mod detection;
mod mask;
mod pseudo;
mod timeline;

pub use confidence::ConfidenceMap;
pub use detection::{BBox, Detection};
pub use mask::{LabelMask, MaskKind, VOID_ID};
pub use pseudo::{PseudoLabel, DEFAULT_PSEUDO_LOSS_WEIGHT, KEY_FRAME_LOSS_WEIGHT};
pub use timeline::{
    nearest_key_frame, validate_timeline, Fps, FrameTimeline, KeyFrameRef, Rule, Violation,
};

use crate::scalar::Scalar;

/// Per-frame remaining time (seconds) until a step class next becomes active,
/// clipped to `[0, horizon]`. Zero exactly on frames where the step is active.
#[derive(Clone, Debug, PartialEq)]
pub struct AnticipationSeries<T: Scalar> {
    pub class_id: u32,
    pub horizon: T,
    pub frames: Vec<u32>,
    pub values: Vec<T>,
}

impl<T: Scalar> AnticipationSeries<T> {
    pub fn is_valid(&self) -> bool {
        self.horizon > T::zero()
            && self.frames.len() == self.values.len()
            && self.values.iter().all(|&r| r >= T::zero() && r <= self.horizon)
    }
}
