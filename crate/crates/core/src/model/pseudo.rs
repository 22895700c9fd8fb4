use crate::scalar::Scalar;

use super::{ConfidenceMap, LabelMask};

/// Loss weight of a human-annotated key frame.
pub const KEY_FRAME_LOSS_WEIGHT: f64 = 1.0;
/// Default loss weight of an interpolated (non-key) pseudo-label.
pub const DEFAULT_PSEUDO_LOSS_WEIGHT: f64 = 0.03;

/// Fused label for one frame together with its training weight and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel<T: Scalar> {
    pub frame: u32,
    pub mask: LabelMask,
    pub confidence: ConfidenceMap<T>,
    pub loss_weight: T,
    pub source_key_frame: u32,
    /// Frames between `source_key_frame` and `frame`.
    pub hop_distance: u32,
    /// False when no key frame lies within the propagation range.
    pub covered: bool,
}

impl<T: Scalar> PseudoLabel<T> {
    /// Checks the weight dichotomy: 1 on the key frame itself, `pseudo_weight` elsewhere.
    pub fn weight_is_consistent(&self, pseudo_weight: T) -> bool {
        if self.hop_distance == 0 && self.covered {
            self.loss_weight == T::lit(KEY_FRAME_LOSS_WEIGHT)
        } else {
            self.loss_weight == pseudo_weight
        }
    }
}
