use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AnticipationSeries, FrameTimeline};

/// Anticipation horizon used for the suturing dataset, in seconds.
pub const HORIZON_SUTURING_S: f64 = 25.0;
/// Anticipation horizon used for the cholecystectomy dataset, in seconds.
pub const HORIZON_CHOLECYSTECTOMY_S: f64 = 300.0;

fn check_horizon(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam { name: "horizon", reason: format!("{h} is not a positive duration") })
    }
}

/// Remaining time until `step_class` next starts, for every frame, clipped to `[0, h]`.
///
/// Active frames get 0; frames after the last occurrence get `h`.
pub fn anticipation_targets(t: &FrameTimeline, step_class: u32, h: f64) -> Result<AnticipationSeries<f64>> {
    check_horizon(h)?;
    let mut steps = Vec::with_capacity(t.frames.len());
    for &f in &t.frames {
        let s = *t.step_of.get(&f).ok_or_else(|| Error::InvalidData(format!("frame {f} has no step id")))?;
        steps.push(s);
    }
    if !steps.contains(&step_class) {
        return Err(Error::UnknownStepClass(step_class));
    }
    let mut values = vec![h; t.frames.len()];
    let mut next_active: Option<u32> = None;
    for i in (0..t.frames.len()).rev() {
        let f = t.frames[i];
        if steps[i] == step_class {
            values[i] = 0.0;
            next_active = Some(f);
        } else if let Some(onset) = next_active {
            values[i] = t.seconds_between(f, onset).min(h);
        }
    }
    Ok(AnticipationSeries { class_id: step_class, horizon: h, frames: t.frames.clone(), values })
}

/// Predictions `f` and clipped ground truth `r` over the same frames.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnticipationEval {
    pub horizon: f64,
    pub predictions: Vec<f64>,
    pub ground_truth: Vec<f64>,
}

impl AnticipationEval {
    /// Ground truth is clipped into `[0, horizon]`.
    pub fn new(horizon: f64, predictions: Vec<f64>, ground_truth: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if predictions.len() != ground_truth.len() {
            return Err(Error::LengthMismatch(format!(
                "{} predictions vs {} ground-truth values",
                predictions.len(),
                ground_truth.len()
            )));
        }
        if let Some(i) = predictions.iter().chain(&ground_truth).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i % predictions.len().max(1)));
        }
        let ground_truth = ground_truth.into_iter().map(|r| r.clamp(0.0, horizon)).collect();
        Ok(AnticipationEval { horizon, predictions, ground_truth })
    }

    fn mae_below(&self, upper: f64) -> Option<f64> {
        let errs: Vec<f64> = self
            .predictions
            .iter()
            .zip(&self.ground_truth)
            .filter(|(_, &r)| r > 0.0 && r < upper)
            .map(|(f, r)| (f - r).abs())
            .collect();
        super::segmentation::mean(&errs)
    }
}

/// Mean absolute error over frames with `0 < r < h`; `None` when no frame qualifies.
pub fn mae_in(e: &AnticipationEval) -> Option<f64> {
    e.mae_below(e.horizon)
}

/// Mean absolute error over frames with `0 < r < 0.1·h`; `None` when no frame qualifies.
pub fn mae_e(e: &AnticipationEval) -> Option<f64> {
    e.mae_below(0.1 * e.horizon)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnticipationReport {
    pub horizon: f64,
    pub frames: usize,
    pub mae_in: Option<f64>,
    pub mae_e: Option<f64>,
}

pub fn evaluate_anticipation(e: &AnticipationEval) -> AnticipationReport {
    AnticipationReport { horizon: e.horizon, frames: e.predictions.len(), mae_in: mae_in(e), mae_e: mae_e(e) }
}
