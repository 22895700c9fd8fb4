//! End-to-end interpolation run: load, propagate, fuse, refine, emit.
//!
//! Nothing is written until every video has been processed, so a failing run leaves no
//! partial output behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::fuse::{emit_pseudo_label, fuse, refine_with_confidence, refined_confidence, FusionParams};
use crate::io::{load_dataset, write_pseudo_labels, FlowOrigin, Manifest, PseudoLabelSet, VideoData, VideoFlowSource};
use crate::model::{PseudoLabel, DEFAULT_PSEUDO_LOSS_WEIGHT, KEY_FRAME_LOSS_WEIGHT};
use crate::warp::{propagate_labels, with_jobs, Propagated, PropagationConfig};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub source: FlowOrigin,
    #[serde(flatten)]
    pub params: FlowParams,
}

/// Settings of one interpolation run; every section is optional in the TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolateConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub pseudo_weight: f64,
    /// Apply morphological refinement to fused non-key labels.
    pub refine: bool,
    pub flow: FlowConfig,
    pub propagation: PropagationConfig,
    pub fusion: FusionParams,
}

impl Default for InterpolateConfig {
    fn default() -> Self {
        InterpolateConfig {
            dataset: None,
            out: None,
            pseudo_weight: DEFAULT_PSEUDO_LOSS_WEIGHT,
            refine: true,
            flow: FlowConfig::default(),
            propagation: PropagationConfig::default(),
            fusion: FusionParams::default(),
        }
    }
}

impl InterpolateConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pseudo_weight >= 0.0 && self.pseudo_weight.is_finite()) {
            return Err(Error::InvalidParam { name: "pseudo_weight", reason: "must be finite and >= 0".into() });
        }
        if self.propagation.max_hop < 1 {
            return Err(Error::InvalidParam { name: "propagation.max_hop", reason: "must be >= 1".into() });
        }
        if let Some(c) = &self.propagation.consistency {
            c.validate()?;
        }
        self.flow.params.validate()?;
        self.fusion.validate()
    }

    /// Parameters echoed into every sidecar; paths are left out so outputs do not depend
    /// on where the dataset or output directory lives.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "pseudo_weight": self.pseudo_weight,
            "refine": self.refine,
            "flow": self.flow,
            "propagation": self.propagation,
            "fusion": self.fusion,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub video_id: String,
    pub frames: usize,
    pub key_frames: usize,
    pub covered_frames: usize,
    pub uncovered_frames: Vec<u32>,
    pub coverage_pct: f64,
    pub mean_confidence: f64,
    pub void_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub videos: Vec<VideoSummary>,
    pub frames: usize,
    pub covered_frames: usize,
    pub coverage_pct: f64,
    pub mean_confidence: f64,
    pub void_fraction: f64,
    /// Fully resolved configuration, defaults included.
    pub config: InterpolateConfig,
}

#[derive(Clone, Debug)]
pub struct Interpolation {
    pub sets: Vec<PseudoLabelSet>,
    pub report: RunReport,
}

fn finish_frame(
    video: &VideoData,
    p: Propagated<f32>,
    cfg: &InterpolateConfig,
) -> Result<PseudoLabel<f32>> {
    let t = &video.timeline;
    let weight = cfg.pseudo_weight as f32;
    if !p.covered {
        return Ok(PseudoLabel {
            frame: p.frame,
            mask: p.mask,
            confidence: p.confidence,
            loss_weight: weight,
            source_key_frame: p.source_key,
            hop_distance: p.hop,
            covered: false,
        });
    }
    if t.is_key(p.frame) {
        // annotated frames pass through untouched
        return emit_pseudo_label(p.mask, p.confidence, t, p.frame, p.source_key, 0, weight);
    }
    let prob = video.load_prob(p.frame)?;
    let fused = fuse(&p.mask, &p.confidence, prob.as_ref(), &cfg.fusion)?;
    let (mask, conf) = if cfg.refine {
        let refined = refine_with_confidence(&fused.mask, Some(&fused.confidence), &cfg.fusion);
        let conf = refined_confidence(&fused.mask, &fused.confidence, &refined);
        (refined, conf)
    } else {
        (fused.mask, fused.confidence)
    };
    emit_pseudo_label(mask, conf, t, p.frame, p.source_key, p.hop, weight)
}

fn summarize(video_id: &str, key_frames: usize, labels: &[PseudoLabel<f32>]) -> VideoSummary {
    let frames = labels.len();
    let covered = labels.iter().filter(|l| l.covered).count();
    let px: usize = labels.iter().map(|l| l.mask.data().len()).sum();
    let conf: f64 = labels.iter().flat_map(|l| l.confidence.data()).map(|&c| c as f64).sum();
    let void: usize = labels.iter().map(|l| l.mask.void_count()).sum();
    VideoSummary {
        video_id: video_id.to_string(),
        frames,
        key_frames,
        covered_frames: covered,
        uncovered_frames: labels.iter().filter(|l| !l.covered).map(|l| l.frame).collect(),
        coverage_pct: pct(covered, frames),
        mean_confidence: if px == 0 { 0.0 } else { conf / px as f64 },
        void_fraction: if px == 0 { 0.0 } else { void as f64 / px as f64 },
    }
}

fn pct(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

/// Pseudo-labels for every frame of one video, ordered by frame index.
pub fn interpolate_video(video: &VideoData, cfg: &InterpolateConfig, jobs: Option<usize>) -> Result<Vec<PseudoLabel<f32>>> {
    let source = VideoFlowSource::new(video, cfg.flow.source, cfg.flow.params.clone());
    let propagated = propagate_labels(&video.timeline, &video.key_masks, &source, &cfg.propagation, jobs)?;
    let items: Vec<Propagated<f32>> = propagated.into_values().collect();
    with_jobs(jobs, || items.into_par_iter().map(|p| finish_frame(video, p, cfg)).collect())
}

/// Runs the whole dataset in memory.
pub fn run_interpolation(cfg: &InterpolateConfig, jobs: Option<usize>) -> Result<Interpolation> {
    cfg.validate()?;
    let root = cfg
        .dataset
        .as_deref()
        .ok_or(Error::InvalidParam { name: "dataset", reason: "no dataset root given".into() })?;
    let ds = load_dataset(root)?;
    let echo = cfg.echo();
    let mut sets = Vec::with_capacity(ds.videos.len());
    let mut videos = Vec::with_capacity(ds.videos.len());
    for v in &ds.videos {
        let labels = interpolate_video(v, cfg, jobs)?;
        videos.push(summarize(v.video_id(), v.timeline.key_frames.len(), &labels));
        sets.push(PseudoLabelSet { video_id: v.video_id().to_string(), labels, params: echo.clone() });
    }
    let all: Vec<&PseudoLabel<f32>> = sets.iter().flat_map(|s| &s.labels).collect();
    let frames = all.len();
    let covered = all.iter().filter(|l| l.covered).count();
    let px: usize = all.iter().map(|l| l.mask.data().len()).sum();
    let conf: f64 = all.iter().flat_map(|l| l.confidence.data()).map(|&c| c as f64).sum();
    let void: usize = all.iter().map(|l| l.mask.void_count()).sum();
    let report = RunReport {
        videos,
        frames,
        covered_frames: covered,
        coverage_pct: pct(covered, frames),
        mean_confidence: if px == 0 { 0.0 } else { conf / px as f64 },
        void_fraction: if px == 0 { 0.0 } else { void as f64 / px as f64 },
        config: cfg.clone(),
    };
    Ok(Interpolation { sets, report })
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("frames = {}\n", self.frames));
        s.push_str(&format!("covered_frames = {}\n", self.covered_frames));
        s.push_str(&format!("coverage_pct = {:.4}\n", self.coverage_pct));
        s.push_str(&format!("mean_confidence = {:.6}\n", self.mean_confidence));
        s.push_str(&format!("void_fraction = {:.6}\n", self.void_fraction));
        for v in &self.videos {
            let id = &v.video_id;
            s.push_str(&format!("{id}.frames = {}\n", v.frames));
            s.push_str(&format!("{id}.coverage_pct = {:.4}\n", v.coverage_pct));
            s.push_str(&format!("{id}.mean_confidence = {:.6}\n", v.mean_confidence));
            s.push_str(&format!("{id}.void_fraction = {:.6}\n", v.void_fraction));
            let unc: Vec<String> = v.uncovered_frames.iter().map(u32::to_string).collect();
            s.push_str(&format!("{id}.uncovered_frames = [{}]\n", unc.join(", ")));
        }
        let cfg = toml::to_string(&self.config).unwrap_or_default();
        s.push_str("\n# resolved configuration\n");
        s.push_str(&cfg);
        s
    }
}

/// Writes pseudo-labels, manifest and run report under `out`.
pub fn write_interpolation(out: &Path, run: &Interpolation) -> Result<Manifest> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let manifest = write_pseudo_labels(out, &run.sets)?;
    let p = out.join(REPORT_JSON);
    let mut text = serde_json::to_string_pretty(&run.report).map_err(|e| Error::Json { path: p.clone(), source: e })?;
    text.push('\n');
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    let p = out.join(REPORT_TEXT);
    std::fs::write(&p, run.report.to_text()).map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}

/// Per-frame weights implied by a run, for checking the weighting scheme.
pub fn loss_weights(labels: &[PseudoLabel<f32>]) -> BTreeMap<u32, f32> {
    labels.iter().map(|l| (l.frame, l.loss_weight)).collect()
}

/// Key-frame weight as `f32`.
pub fn key_weight() -> f32 {
    KEY_FRAME_LOSS_WEIGHT as f32
}
