use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub frames: usize,
    /// One-vs-rest AP per class with at least one ground-truth frame.
    pub ap: BTreeMap<usize, f64>,
    pub f1: BTreeMap<usize, f64>,
    pub map: Option<f64>,
    pub macro_f1: Option<f64>,
    pub accuracy: f64,
}

/// Index of the largest score; ties go to the lower class.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// One-vs-rest AP of `scores` against binary `positive`.
///
/// Equal scores form one operating point, so a constant score yields the prevalence.
/// `None` without positives.
pub fn ranking_ap(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            seen += 1;
            tp += positive[order[i]] as usize;
            i += 1;
        }
        points.push(super::detection::PrPoint {
            recall: tp as f64 / n_pos as f64,
            precision: tp as f64 / seen as f64,
            score: s,
        });
    }
    Some(super::detection::all_points_ap(&points))
}

/// Frame-level mAP (macro over classes), macro-F1 of argmax predictions, and accuracy.
///
/// Classes without ground-truth frames are left out of both macro means.
pub fn classification_scores(scores: &[Vec<f64>], gt: &[usize]) -> Result<ClassificationReport> {
    if scores.len() != gt.len() {
        return Err(Error::LengthMismatch(format!("{} score rows vs {} labels", scores.len(), gt.len())));
    }
    if gt.is_empty() {
        return Err(Error::InvalidData("no frames to score".into()));
    }
    let c = scores[0].len();
    for (i, row) in scores.iter().enumerate() {
        if row.len() != c {
            return Err(Error::LengthMismatch(format!("frame {i} has {} scores, expected {c}", row.len())));
        }
        if row.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    if let Some(&bad) = gt.iter().find(|&&g| g >= c) {
        return Err(Error::InvalidData(format!("label {bad} outside {c} classes")));
    }
    let pred: Vec<usize> = scores.iter().map(|r| argmax(r)).collect();
    let mut ap = BTreeMap::new();
    let mut f1 = BTreeMap::new();
    for k in 0..c {
        let positive: Vec<bool> = gt.iter().map(|&g| g == k).collect();
        let col: Vec<f64> = scores.iter().map(|r| r[k]).collect();
        let Some(a) = ranking_ap(&col, &positive) else { continue };
        ap.insert(k, a);
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&p, &g) in pred.iter().zip(gt) {
            match (p == k, g == k) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        f1.insert(k, 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
    }
    let correct = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    let mean = |m: &BTreeMap<usize, f64>| super::segmentation::mean(&m.values().copied().collect::<Vec<_>>());
    Ok(ClassificationReport {
        frames: gt.len(),
        map: mean(&ap),
        macro_f1: mean(&f1),
        ap,
        f1,
        accuracy: correct as f64 / gt.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(k: usize, c: usize) -> Vec<f64> {
        (0..c).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn perfect_predictions() {
        let gt = [0, 1, 2, 1];
        let s: Vec<_> = gt.iter().map(|&k| one_hot(k, 3)).collect();
        let r = classification_scores(&s, &gt).unwrap();
        assert_eq!((r.map, r.macro_f1, r.accuracy), (Some(1.0), Some(1.0), 1.0));
    }

    #[test]
    fn hand_computed_f1() {
        let gt = [0, 0, 1, 1];
        let s: Vec<_> = [0, 1, 1, 1].iter().map(|&k| one_hot(k, 2)).collect();
        let r = classification_scores(&s, &gt).unwrap();
        assert!((r.accuracy - 0.75).abs() < 1e-12);
        assert!((r.f1[&0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1[&1] - 0.8).abs() < 1e-12);
        assert!((r.macro_f1.unwrap() - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_give_prevalence() {
        // every binary labelling up to six frames
        for n in 1..=6usize {
            for bits in 0..(1u32 << n) {
                let positive: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                let k = positive.iter().filter(|&&p| p).count();
                let ap = ranking_ap(&vec![0.5; n], &positive);
                if k == 0 {
                    assert_eq!(ap, None);
                } else {
                    assert!((ap.unwrap() - k as f64 / n as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn class_without_frames_skipped() {
        let s = vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.8, 0.0]];
        let r = classification_scores(&s, &[0, 1]).unwrap();
        assert!(!r.ap.contains_key(&2));
        assert_eq!(r.map, Some(1.0));
    }

    #[test]
    fn malformed_inputs() {
        assert!(classification_scores(&[vec![1.0]], &[0, 0]).is_err());
        assert!(classification_scores(&[vec![1.0, 0.0]], &[2]).is_err());
        assert!(classification_scores(&[vec![1.0, 0.0], vec![1.0]], &[0, 0]).is_err());
    }
}
