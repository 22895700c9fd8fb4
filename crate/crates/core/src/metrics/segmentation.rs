use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::LabelMask;

/// Intersection and union pixel counts of one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Overlap {
    pub intersection: u64,
    pub union: u64,
}

impl Overlap {
    /// `None` when the union is empty.
    pub fn iou(&self) -> Option<f64> {
        (self.union > 0).then(|| self.intersection as f64 / self.union as f64)
    }
}

/// Per-class overlap of one image pair, on class ids. Pixels void in `gt` are ignored.
pub fn class_overlaps(pred: &LabelMask, gt: &LabelMask) -> Result<BTreeMap<u8, Overlap>> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims("prediction vs ground truth", pred.dims(), gt.dims()));
    }
    let mut out: BTreeMap<u8, Overlap> = BTreeMap::new();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let Some(gc) = gt.class_of(g) else { continue };
        let pc = pred.class_of(p);
        if pc == Some(gc) {
            let o = out.entry(gc).or_default();
            o.intersection += 1;
            o.union += 1;
        } else {
            out.entry(gc).or_default().union += 1;
            if let Some(pc) = pc {
                out.entry(pc).or_default().union += 1;
            }
        }
    }
    Ok(out)
}

pub fn iou_semantic(pred: &LabelMask, gt: &LabelMask, class_id: u8) -> Result<Option<f64>> {
    Ok(class_overlaps(pred, gt)?.get(&class_id).and_then(Overlap::iou))
}

fn classes_in(gt: &LabelMask) -> BTreeSet<u8> {
    gt.label_ids().into_iter().filter_map(|id| gt.class_of(id)).collect()
}

fn check_pairs(preds: &[LabelMask], gts: &[LabelMask]) -> Result<()> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch(format!("{} predictions vs {} ground truths", preds.len(), gts.len())));
    }
    Ok(())
}

/// Mean over images of the mean IoU over classes present in that image's ground truth.
///
/// `classes` restricts the classes considered. Images without any considered class are
/// skipped; `None` when no image remains.
pub fn miou(preds: &[LabelMask], gts: &[LabelMask], classes: Option<&BTreeSet<u8>>) -> Result<Option<f64>> {
    check_pairs(preds, gts)?;
    let mut per_image = Vec::new();
    for (p, g) in preds.iter().zip(gts) {
        let overlaps = class_overlaps(p, g)?;
        let ious: Vec<f64> = classes_in(g)
            .into_iter()
            .filter(|c| classes.map_or(true, |s| s.contains(c)))
            .filter_map(|c| overlaps.get(&c).and_then(Overlap::iou))
            .collect();
        if !ious.is_empty() {
            per_image.push(ious.iter().sum::<f64>() / ious.len() as f64);
        }
    }
    Ok(mean(&per_image))
}

/// Overlaps pooled over the whole dataset, per class.
pub fn pooled_overlaps(preds: &[LabelMask], gts: &[LabelMask]) -> Result<BTreeMap<u8, Overlap>> {
    check_pairs(preds, gts)?;
    let mut pooled: BTreeMap<u8, Overlap> = BTreeMap::new();
    for (p, g) in preds.iter().zip(gts) {
        for (c, o) in class_overlaps(p, g)? {
            let e = pooled.entry(c).or_default();
            e.intersection += o.intersection;
            e.union += o.union;
        }
    }
    Ok(pooled)
}

/// Mean over classes of the dataset-pooled IoU; classes with an empty union are skipped.
pub fn mciou(preds: &[LabelMask], gts: &[LabelMask], classes: Option<&BTreeSet<u8>>) -> Result<Option<f64>> {
    let ious: Vec<f64> = pooled_overlaps(preds, gts)?
        .into_iter()
        .filter(|(c, _)| classes.map_or(true, |s| s.contains(c)))
        .filter_map(|(_, o)| o.iou())
        .collect();
    Ok(mean(&ious))
}

pub(crate) fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentationReport {
    pub images: usize,
    /// Dataset-pooled IoU per class.
    pub iou: BTreeMap<u8, f64>,
    pub miou: Option<f64>,
    pub mciou: Option<f64>,
}

pub fn evaluate_segmentation(
    preds: &[LabelMask],
    gts: &[LabelMask],
    classes: Option<&BTreeSet<u8>>,
) -> Result<SegmentationReport> {
    let iou = pooled_overlaps(preds, gts)?
        .into_iter()
        .filter(|(c, _)| classes.map_or(true, |s| s.contains(c)))
        .filter_map(|(c, o)| o.iou().map(|v| (c, v)))
        .collect();
    Ok(SegmentationReport {
        images: preds.len(),
        iou,
        miou: miou(preds, gts, classes)?,
        mciou: mciou(preds, gts, classes)?,
    })
}
