//! Confidence-gated fusion of warped labels with segmentation probabilities, refinement,
//! and pseudo-label emission.

mod morph;
mod prob;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use morph::{close, components, dilate, disk_offsets, erode, open, refine, refine_with_confidence, refined_confidence};
pub use prob::{load_prob, read_prob, save_prob, write_prob, ProbMap, NORMALISATION_TOL, PRB_MAGIC};

use crate::error::{Error, Result};
use crate::model::{
    ConfidenceMap, FrameTimeline, LabelMask, MaskKind, PseudoLabel, DEFAULT_PSEUDO_LOSS_WEIGHT,
    KEY_FRAME_LOSS_WEIGHT, VOID_ID,
};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionParams {
    /// Flow confidence at or above which a warped label is kept.
    pub tau_flow: f64,
    /// Maximum class probability at or above which the prediction is taken.
    pub tau_seg: f64,
    /// Connected components smaller than this become void.
    pub min_component_px: usize,
    /// Radius of the disk used for opening and closing.
    pub morph_radius: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams { tau_flow: 0.7, tau_seg: 0.9, min_component_px: 64, morph_radius: 1 }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_flow", self.tau_flow), ("tau_seg", self.tau_seg)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam { name, reason: format!("{v} outside [0, 1]") });
            }
        }
        Ok(())
    }
}

/// Which rule of the fusion table decided a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionRule {
    Agreement,
    FlowTrust,
    SegTrust,
    Void,
}

/// Fused raster plus the rule that decided each pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Fused<T: Scalar> {
    pub mask: LabelMask,
    pub confidence: ConfidenceMap<T>,
    pub rules: Vec<FusionRule>,
}

impl<T: Scalar> Fused<T> {
    pub fn rule_counts(&self) -> BTreeMap<FusionRule, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rules {
            *m.entry(*r).or_insert(0) += 1;
        }
        m
    }
}

/// Combines a warped mask with segmentation probabilities pixel by pixel.
///
/// With `a` the warped id, `s` the argmax class and `m` its probability:
/// agreement (`a` non-void, class of `a` = `s`) keeps `a` at confidence `max(c_flow, m)`;
/// otherwise a non-void `a` with `c_flow ≥ tau_flow` is kept at `c_flow`; otherwise
/// `m ≥ tau_seg` takes `s` at `m`; otherwise the pixel is void at 0.
///
/// Without probabilities only the flow rule applies. For instance masks `s` is a class and is
/// re-attached to an instance only when the warped mask holds exactly one instance of it.
pub fn fuse<T: Scalar>(
    warped: &LabelMask,
    c_flow: &ConfidenceMap<T>,
    prob: Option<&ProbMap<T>>,
    params: &FusionParams,
) -> Result<Fused<T>> {
    params.validate()?;
    if c_flow.dims() != warped.dims() {
        return Err(Error::dims("flow confidence vs warped mask", c_flow.dims(), warped.dims()));
    }
    let (w, h) = warped.dims();
    let mut instance_of_class: BTreeMap<u8, Option<u8>> = BTreeMap::new();
    if let Some(p) = prob {
        if p.dims() != warped.dims() {
            return Err(Error::dims("prob map vs warped mask", p.dims(), warped.dims()));
        }
        for id in warped.label_ids() {
            let class = warped.class_of(id).expect("non-void ids have a class");
            if class as usize >= p.classes() {
                return Err(Error::InvalidData(format!(
                    "label class {class} outside the {}-class probability space",
                    p.classes()
                )));
            }
            if warped.is_instance() {
                instance_of_class
                    .entry(class)
                    .and_modify(|e| *e = None)
                    .or_insert(Some(id));
            }
        }
    }
    let tau_flow = T::lit(params.tau_flow);
    let tau_seg = T::lit(params.tau_seg);
    let mut labels = Vec::with_capacity(w * h);
    let mut conf = Vec::with_capacity(w * h);
    let mut rules = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let a = warped.data()[i];
        let cf = c_flow.data()[i];
        let seg = prob.map(|p| p.argmax(i));
        let (label, c, rule) = match seg {
            Some((s, m)) if a != VOID_ID && warped.class_of(a) == Some(s as u8) => {
                (a, cf.max(m), FusionRule::Agreement)
            }
            _ if a != VOID_ID && cf >= tau_flow => (a, cf, FusionRule::FlowTrust),
            Some((s, m)) if m >= tau_seg => {
                let id = match warped.kind() {
                    MaskKind::Semantic => Some(s as u8),
                    MaskKind::Instance { .. } => instance_of_class.get(&(s as u8)).copied().flatten(),
                };
                match id {
                    Some(id) => (id, m, FusionRule::SegTrust),
                    None => (VOID_ID, T::zero(), FusionRule::Void),
                }
            }
            _ => (VOID_ID, T::zero(), FusionRule::Void),
        };
        labels.push(label);
        conf.push(c);
        rules.push(rule);
    }
    Ok(Fused {
        mask: warped.with_data(labels)?,
        confidence: ConfidenceMap::from_clamped(w, h, conf)?,
        rules,
    })
}

/// Attaches loss weight and provenance to a fused label.
///
/// Key frames get weight 1, every other frame `pseudo_weight`.
pub fn emit_pseudo_label<T: Scalar>(
    fused: LabelMask,
    conf: ConfidenceMap<T>,
    t: &FrameTimeline,
    frame: u32,
    source_key: u32,
    hop: u32,
    pseudo_weight: T,
) -> Result<PseudoLabel<T>> {
    if !t.contains(frame) {
        return Err(Error::UnknownFrame(frame));
    }
    if pseudo_weight < T::zero() || !pseudo_weight.is_finite() {
        return Err(Error::InvalidParam { name: "pseudo_weight", reason: "must be finite and >= 0".into() });
    }
    if fused.dims() != conf.dims() {
        return Err(Error::dims("confidence vs mask", conf.dims(), fused.dims()));
    }
    let loss_weight = if t.is_key(frame) { T::lit(KEY_FRAME_LOSS_WEIGHT) } else { pseudo_weight };
    Ok(PseudoLabel {
        frame,
        mask: fused,
        confidence: conf,
        loss_weight,
        source_key_frame: source_key,
        hop_distance: hop,
        covered: true,
    })
}

/// Default weight as the scalar type.
pub fn default_pseudo_weight<T: Scalar>() -> T {
    T::lit(DEFAULT_PSEUDO_LOSS_WEIGHT)
}
