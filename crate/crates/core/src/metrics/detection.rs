use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, Detection, LabelMask, VOID_ID};

/// Default IoU a detection needs to match a ground-truth instance.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKernel {
    #[default]
    Box,
    /// Overlap of the attached region masks (pixels that are neither 0 nor void).
    Mask,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    /// Score of the last detection admitted at this operating point.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassAp {
    pub ap: f64,
    pub gt_instances: usize,
    pub detections: usize,
    pub pr: Vec<PrPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub iou_thresh: f64,
    pub kernel: MatchKernel,
    /// Classes with at least one ground-truth instance.
    pub ap: BTreeMap<u32, ClassAp>,
    pub map: Option<f64>,
}

/// Area under the all-points precision envelope of a sweep ordered by admission.
pub fn all_points_ap(points: &[PrPoint]) -> f64 {
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in points.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap
}

fn region(m: &LabelMask) -> impl Iterator<Item = bool> + '_ {
    m.data().iter().map(|&id| id != 0 && id != VOID_ID)
}

pub fn mask_iou(a: &LabelMask, b: &LabelMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dims("detection masks", a.dims(), b.dims()));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (x, y) in region(a).zip(region(b)) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

fn overlap(a: &Detection, b: &Detection, kernel: MatchKernel) -> Result<f64> {
    match kernel {
        MatchKernel::Box => Ok(a.bbox.iou(&b.bbox)),
        MatchKernel::Mask => match (&a.mask, &b.mask) {
            (Some(x), Some(y)) => mask_iou(x, y),
            _ => Err(Error::InvalidData(format!(
                "mask kernel needs masks on every detection (frame {})",
                a.frame
            ))),
        },
    }
}

/// Per-class average precision with greedy score-ordered matching.
///
/// Detections of a class are visited by descending score (ties keep input order); each
/// takes the unmatched same-frame ground truth of highest IoU, if that IoU reaches
/// `iou_thresh`. AP is the area under the all-points precision envelope; mAP averages
/// classes that have at least one ground-truth instance.
pub fn detection_ap(
    preds: &[Detection],
    gts: &[Detection],
    iou_thresh: f64,
    kernel: MatchKernel,
) -> Result<DetectionReport> {
    if !(0.0..=1.0).contains(&iou_thresh) {
        return Err(Error::InvalidParam { name: "iou_thresh", reason: format!("{iou_thresh} outside [0, 1]") });
    }
    for d in preds.iter().chain(gts) {
        d.bbox.check()?;
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::InvalidData(format!("score {} outside [0, 1] in frame {}", d.score, d.frame)));
        }
    }
    let mut by_class: BTreeMap<u32, (Vec<&Detection>, Vec<&Detection>)> = BTreeMap::new();
    for g in gts {
        by_class.entry(g.class_id).or_default().1.push(g);
    }
    for p in preds {
        by_class.entry(p.class_id).or_default().0.push(p);
    }
    let mut ap = BTreeMap::new();
    for (class, (mut ps, gs)) in by_class {
        if gs.is_empty() {
            continue;
        }
        ps.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut matched = vec![false; gs.len()];
        let mut tp = 0usize;
        let mut pr = Vec::with_capacity(ps.len());
        for (rank, p) in ps.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gs.iter().enumerate() {
                if matched[j] || g.frame != p.frame {
                    continue;
                }
                let iou = overlap(p, g, kernel)?;
                if iou >= iou_thresh && best.map_or(true, |(_, b)| iou > b) {
                    best = Some((j, iou));
                }
            }
            if let Some((j, _)) = best {
                matched[j] = true;
                tp += 1;
            }
            pr.push(PrPoint {
                recall: tp as f64 / gs.len() as f64,
                precision: tp as f64 / (rank + 1) as f64,
                score: p.score,
            });
        }
        ap.insert(
            class,
            ClassAp { ap: all_points_ap(&pr), gt_instances: gs.len(), detections: ps.len(), pr },
        );
    }
    let map = super::segmentation::mean(&ap.values().map(|c| c.ap).collect::<Vec<_>>());
    Ok(DetectionReport { iou_thresh, kernel, ap, map })
}

/// Box with the given corner and size, for fixtures and converters.
pub fn xywh(x: f64, y: f64, w: f64, h: f64) -> Result<BBox> {
    BBox::new(x, y, x + w, y + h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt() -> Detection {
        Detection::ground_truth(0, xywh(0.0, 0.0, 10.0, 10.0).unwrap(), 1)
    }

    /// Box of width 10 overlapping `gt()` with the requested IoU (horizontal offset).
    fn pred_with_iou(iou: f64, score: f64) -> Detection {
        // overlap 10·(10−d), union 10·(10+d) → d = 10(1−iou)/(1+iou)
        let d = 10.0 * (1.0 - iou) / (1.0 + iou);
        Detection::boxed(0, xywh(d, 0.0, 10.0, 10.0).unwrap(), 1, score)
    }

    #[test]
    fn single_match() {
        let r = detection_ap(&[pred_with_iou(0.6, 0.9)], &[gt()], DEFAULT_IOU_THRESHOLD, MatchKernel::Box).unwrap();
        assert_eq!(r.map, Some(1.0));
    }

    #[test]
    fn greedy_by_score() {
        let preds = [pred_with_iou(0.6, 0.9), pred_with_iou(0.7, 0.8)];
        let r = detection_ap(&preds, &[gt()], 0.5, MatchKernel::Box).unwrap();
        assert_eq!(r.map, Some(1.0));
        let c = &r.ap[&1];
        assert_eq!(c.pr[0].precision, 1.0);
        assert_eq!(c.pr[1].precision, 0.5);
    }

    #[test]
    fn below_threshold_is_false_positive() {
        let r = detection_ap(&[pred_with_iou(0.45, 0.9)], &[gt()], 0.5, MatchKernel::Box).unwrap();
        assert_eq!(r.map, Some(0.0));
    }

    #[test]
    fn class_without_gt_is_skipped() {
        let mut p = pred_with_iou(0.9, 0.9);
        p.class_id = 4;
        let r = detection_ap(&[p], &[gt()], 0.5, MatchKernel::Box).unwrap();
        assert!(!r.ap.contains_key(&4));
        assert_eq!(r.map, Some(0.0));
        assert_eq!(detection_ap(&[], &[], 0.5, MatchKernel::Box).unwrap().map, None);
    }

    #[test]
    fn other_frame_never_matches() {
        let mut p = pred_with_iou(1.0, 0.9);
        p.frame = 3;
        assert_eq!(detection_ap(&[p], &[gt()], 0.5, MatchKernel::Box).unwrap().map, Some(0.0));
    }

    #[test]
    fn mask_kernel() {
        let a = LabelMask::semantic(4, 1, vec![1, 1, 0, 0]).unwrap();
        let b = LabelMask::semantic(4, 1, vec![0, 1, 1, 0]).unwrap();
        assert!((mask_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let mut g = gt();
        g.mask = Some(a.clone());
        let mut p = pred_with_iou(0.1, 0.5);
        p.mask = Some(a);
        let r = detection_ap(&[p.clone()], &[g.clone()], 0.5, MatchKernel::Mask).unwrap();
        assert_eq!(r.map, Some(1.0));
        p.mask = None;
        assert!(detection_ap(&[p], &[g], 0.5, MatchKernel::Mask).is_err());
    }

    #[test]
    fn envelope_fills_dips() {
        // TP, FP, TP over 2 gts: envelope at recall 1/2 is max(1, 2/3)
        let pts = [
            PrPoint { recall: 0.5, precision: 1.0, score: 0.9 },
            PrPoint { recall: 0.5, precision: 0.5, score: 0.8 },
            PrPoint { recall: 1.0, precision: 2.0 / 3.0, score: 0.7 },
        ];
        assert!((all_points_ap(&pts) - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }
}
