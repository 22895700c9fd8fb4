//! On-disk pseudo-label sets: per-frame mask PNG, confidence raster and JSON sidecar,
//! indexed by a manifest of SHA-256 digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{LabelMask, MaskKind, PseudoLabel, VOID_ID};

use super::dataset::{frame_stem, MaskKindName};
use super::raster::{load_confidence, read_mask_png, save_confidence, write_mask_png};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

/// Per-frame metadata written next to each pseudo-label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub video_id: String,
    pub frame: u32,
    pub source_key_frame: u32,
    pub hop_distance: u32,
    pub loss_weight: f32,
    pub covered: bool,
    pub mean_confidence: f64,
    pub void_fraction: f64,
    pub mask_kind: MaskKindName,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub class_of_instance: BTreeMap<u8, u8>,
    /// Parameters that produced the label.
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output root, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub files: Vec<ManifestEntry>,
}

/// All pseudo-labels of one video plus the parameter echo stored in each sidecar.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabelSet {
    pub video_id: String,
    pub labels: Vec<PseudoLabel<f32>>,
    pub params: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn kind_parts(kind: &MaskKind) -> (MaskKindName, BTreeMap<u8, u8>) {
    match kind {
        MaskKind::Semantic => (MaskKindName::Semantic, BTreeMap::new()),
        MaskKind::Instance { class_of_instance } => (MaskKindName::Instance, class_of_instance.clone()),
    }
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_frame(root: &Path, video_id: &str, label: &PseudoLabel<f32>, params: &serde_json::Value) -> Result<Vec<String>> {
    let stem = frame_stem(label.frame);
    let rel = [
        format!("{video_id}/masks/{stem}.png"),
        format!("{video_id}/confidence/{stem}.cnf"),
        format!("{video_id}/labels/{stem}.json"),
    ];
    write_mask_png(&label.mask, &root.join(&rel[0]))?;
    save_confidence(&label.confidence, &root.join(&rel[1]))?;
    let n = label.mask.data().len().max(1);
    let (mask_kind, class_of_instance) = kind_parts(label.mask.kind());
    let side = Sidecar {
        video_id: video_id.to_string(),
        frame: label.frame,
        source_key_frame: label.source_key_frame,
        hop_distance: label.hop_distance,
        loss_weight: label.loss_weight,
        covered: label.covered,
        mean_confidence: label.confidence.mean() as f64,
        void_fraction: label.mask.void_count() as f64 / n as f64,
        mask_kind,
        class_of_instance,
        params: params.clone(),
    };
    let p = root.join(&rel[2]);
    let mut text = serde_json::to_string_pretty(&side).map_err(|e| Error::Json { path: p.clone(), source: e })?;
    text.push('\n');
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(rel.to_vec())
}

/// Writes every set under `root` and returns the manifest (also saved as `manifest.json`).
pub fn write_pseudo_labels(root: &Path, sets: &[PseudoLabelSet]) -> Result<Manifest> {
    for s in sets {
        for sub in ["masks", "confidence", "labels"] {
            mkdir(&root.join(&s.video_id).join(sub))?;
        }
    }
    let jobs: Vec<(&PseudoLabelSet, &PseudoLabel<f32>)> =
        sets.iter().flat_map(|s| s.labels.iter().map(move |l| (s, l))).collect();
    let written: Vec<Vec<String>> = jobs
        .par_iter()
        .map(|(s, l)| write_frame(root, &s.video_id, l, &s.params))
        .collect::<Result<_>>()?;
    let mut paths: Vec<String> = written.into_iter().flatten().collect();
    paths.sort();
    let files = paths
        .into_par_iter()
        .map(|path| {
            let (sha256, bytes) = sha256_file(&root.join(&path))?;
            Ok(ManifestEntry { path, sha256, bytes })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { version: MANIFEST_VERSION, files };
    let p = root.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json { path: p.clone(), source: e })?;
    text.push('\n');
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let p = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: p, source: e })
}

/// Reads back a pseudo-label tree, checking every digest against the manifest.
pub fn read_pseudo_labels(root: &Path) -> Result<Vec<PseudoLabelSet>> {
    let manifest = read_manifest(root)?;
    for e in &manifest.files {
        let path = root.join(&e.path);
        let (digest, _) = sha256_file(&path)?;
        if digest != e.sha256 {
            return Err(Error::Dataset { path, message: "digest does not match manifest".into() });
        }
    }
    let mut sets: BTreeMap<String, PseudoLabelSet> = BTreeMap::new();
    for e in manifest.files.iter().filter(|e| e.path.ends_with(".json")) {
        let side_path = root.join(&e.path);
        let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
        let side: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::Json { path: side_path.clone(), source: e })?;
        let kind = match side.mask_kind {
            MaskKindName::Semantic => MaskKind::Semantic,
            MaskKindName::Instance => MaskKind::Instance { class_of_instance: side.class_of_instance.clone() },
        };
        let dir: PathBuf = root.join(&side.video_id);
        let stem = frame_stem(side.frame);
        let mask: LabelMask = read_mask_png(&dir.join("masks").join(format!("{stem}.png")), &kind)?;
        let confidence = load_confidence(&dir.join("confidence").join(format!("{stem}.cnf")))?;
        let set = sets.entry(side.video_id.clone()).or_insert_with(|| PseudoLabelSet {
            video_id: side.video_id.clone(),
            labels: Vec::new(),
            params: side.params.clone(),
        });
        set.labels.push(PseudoLabel {
            frame: side.frame,
            mask,
            confidence,
            loss_weight: side.loss_weight,
            source_key_frame: side.source_key_frame,
            hop_distance: side.hop_distance,
            covered: side.covered,
        });
    }
    let mut out: Vec<PseudoLabelSet> = sets.into_values().collect();
    for s in &mut out {
        s.labels.sort_by_key(|l| l.frame);
    }
    Ok(out)
}

/// Fraction of void pixels in a mask.
pub fn void_fraction(mask: &LabelMask) -> f64 {
    let n = mask.data().len();
    if n == 0 {
        return 0.0;
    }
    mask.data().iter().filter(|&&v| v == VOID_ID).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConfidenceMap;

    fn label(frame: u32, weight: f32) -> PseudoLabel<f32> {
        let mask = LabelMask::semantic(4, 3, vec![0, 1, 1, 255, 0, 2, 2, 0, 1, 1, 0, 0]).unwrap();
        let conf = ConfidenceMap::new(4, 3, (0..12).map(|i| i as f32 / 11.0).collect()).unwrap();
        PseudoLabel { frame, mask, confidence: conf, loss_weight: weight, source_key_frame: 0, hop_distance: frame, covered: true }
    }

    #[test]
    fn round_trip_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let sets = vec![PseudoLabelSet {
            video_id: "v1".into(),
            labels: vec![label(0, 1.0), label(3, 0.03)],
            params: serde_json::json!({"tau_flow": 0.7}),
        }];
        let m = write_pseudo_labels(dir.path(), &sets).unwrap();
        assert_eq!(m.files.len(), 6);
        assert!(m.files.windows(2).all(|w| w[0].path < w[1].path));
        let back = read_pseudo_labels(dir.path()).unwrap();
        assert_eq!(back, sets);
    }

    #[test]
    fn tampered_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let sets = vec![PseudoLabelSet { video_id: "v".into(), labels: vec![label(1, 0.03)], params: serde_json::Value::Null }];
        write_pseudo_labels(dir.path(), &sets).unwrap();
        std::fs::write(dir.path().join("v/labels/000001.json"), "{}").unwrap();
        assert!(read_pseudo_labels(dir.path()).is_err());
    }

    #[test]
    fn void_fraction_counts_void() {
        assert!((void_fraction(&label(0, 1.0).mask) - 1.0 / 12.0).abs() < 1e-12);
    }
}
