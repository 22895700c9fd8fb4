//! Evaluation metrics: segmentation overlap, detection AP, frame classification and
//! step-anticipation errors. Reports serialise to JSON and to `key = value` text.

mod anticipation;
mod classification;
mod detection;
mod segmentation;

pub use anticipation::{
    anticipation_targets, evaluate_anticipation, mae_e, mae_in, AnticipationEval, AnticipationReport,
    HORIZON_CHOLECYSTECTOMY_S, HORIZON_SUTURING_S,
};
pub use classification::{argmax, classification_scores, ranking_ap, ClassificationReport};
pub use detection::{
    all_points_ap, detection_ap, mask_iou, xywh, ClassAp, DetectionReport, MatchKernel, PrPoint,
    DEFAULT_IOU_THRESHOLD,
};
pub use segmentation::{
    class_overlaps, evaluate_segmentation, iou_semantic, mciou, miou, pooled_overlaps, Overlap,
    SegmentationReport,
};

use serde::Serialize;
use serde_json::Value;

/// Flattens a report into sorted `key = value` lines; nested keys are joined with dots and
/// undefined values print as `undefined`.
pub fn to_text<R: Serialize>(report: &R) -> String {
    let value = serde_json::to_value(report).expect("reports serialise");
    let mut lines = Vec::new();
    flatten("", &value, &mut lines);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, out);
            }
        }
        Value::Null => out.push(format!("{prefix} = undefined")),
        Value::String(s) => out.push(format!("{prefix} = {s}")),
        other => out.push(format!("{prefix} = {other}")),
    }
}

pub fn to_json<R: Serialize>(report: &R) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialise");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_report_lines() {
        let r = AnticipationReport { horizon: 25.0, frames: 4, mae_in: Some(2.0), mae_e: None };
        assert_eq!(to_text(&r), "frames = 4\nhorizon = 25.0\nmae_e = undefined\nmae_in = 2.0\n");
        assert!(to_json(&r).contains("\"mae_e\": null"));
    }
}
