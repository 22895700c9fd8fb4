use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{load_flow, FlowDirection, FlowField};
use crate::fuse::{load_prob, ProbMap};
use crate::model::{FrameTimeline, LabelMask, MaskKind, VOID_ID};
use crate::raster::GrayImage;
use crate::scalar::Scalar;

use super::raster::{read_frame, read_mask_png};
use super::timeline::{parse_fps, read_timeline_csv};

pub const TIMELINE_FILE: &str = "timeline.csv";
pub const META_FILE: &str = "meta.json";
pub const FRAMES_DIR: &str = "frames";
pub const MASKS_DIR: &str = "masks";
pub const GT_MASKS_DIR: &str = "gt_masks";
pub const FLOWS_DIR: &str = "flows";
pub const PROBS_DIR: &str = "probs";

/// Zero-padded six-digit file stem used for every per-frame file.
pub fn frame_stem(frame: u32) -> String {
    format!("{frame:06}")
}

pub fn flow_file_name(from: u32, to: u32) -> String {
    format!("{from:06}_{to:06}.flo")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKindName {
    #[default]
    Semantic,
    Instance,
}

/// Optional per-video `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VideoMeta {
    /// Integer or ratio string, e.g. `"30"` or `"30000/1001"`.
    pub fps: String,
    /// Declared phase ids; timeline rows outside the set are rejected.
    pub phases: Option<BTreeSet<u32>>,
    /// Declared step ids; timeline rows outside the set are rejected.
    pub steps: Option<BTreeSet<u32>>,
    /// Number of semantic classes; mask ids must lie below it.
    pub classes: Option<u32>,
    pub mask_kind: MaskKindName,
    pub class_of_instance: BTreeMap<u8, u8>,
}

impl Default for VideoMeta {
    fn default() -> Self {
        VideoMeta {
            fps: "30".into(),
            phases: None,
            steps: None,
            classes: None,
            mask_kind: MaskKindName::Semantic,
            class_of_instance: BTreeMap::new(),
        }
    }
}

impl VideoMeta {
    pub fn kind(&self) -> MaskKind {
        match self.mask_kind {
            MaskKindName::Semantic => MaskKind::Semantic,
            MaskKindName::Instance => MaskKind::Instance { class_of_instance: self.class_of_instance.clone() },
        }
    }
}

/// One validated video directory. Frame images, flows and probability maps stay on disk.
#[derive(Clone, Debug)]
pub struct VideoData {
    pub dir: PathBuf,
    pub meta: VideoMeta,
    pub timeline: FrameTimeline,
    pub key_masks: BTreeMap<u32, LabelMask>,
    /// `(width, height)` shared by every frame and mask.
    pub dims: (usize, usize),
}

impl VideoData {
    pub fn video_id(&self) -> &str {
        &self.timeline.video_id
    }

    pub fn frame_path(&self, frame: u32) -> PathBuf {
        self.dir.join(FRAMES_DIR).join(format!("{}.png", frame_stem(frame)))
    }

    pub fn flow_path(&self, from: u32, to: u32) -> PathBuf {
        self.dir.join(FLOWS_DIR).join(flow_file_name(from, to))
    }

    pub fn prob_path(&self, frame: u32) -> PathBuf {
        self.dir.join(PROBS_DIR).join(format!("{}.prb", frame_stem(frame)))
    }

    pub fn has_probs(&self) -> bool {
        self.dir.join(PROBS_DIR).is_dir()
    }

    pub fn load_frame<T: Scalar>(&self, frame: u32) -> Result<GrayImage<T>> {
        read_frame(&self.frame_path(frame))
    }

    /// Flow file for the pair, checked against the video size.
    pub fn load_flow(&self, from: u32, to: u32) -> Result<FlowField<f32>> {
        let p = self.flow_path(from, to);
        if !p.is_file() {
            return Err(Error::FlowUnavailable { from, to, reason: format!("{} not found", p.display()) });
        }
        let f = load_flow(&p, FlowDirection::new(from, to))?;
        if f.dims() != self.dims {
            return Err(Error::Dataset {
                path: p,
                message: format!("flow is {:?}, frames are {:?}", f.dims(), self.dims),
            });
        }
        Ok(f)
    }

    /// Probability map of `frame`, if the video has one.
    pub fn load_prob(&self, frame: u32) -> Result<Option<ProbMap<f32>>> {
        let p = self.prob_path(frame);
        if !p.is_file() {
            return Ok(None);
        }
        let m = load_prob(&p).map_err(|e| Error::Dataset { path: p.clone(), message: e.to_string() })?;
        if m.dims() != self.dims {
            return Err(Error::Dataset { path: p, message: format!("prob map is {:?}, frames are {:?}", m.dims(), self.dims) });
        }
        Ok(Some(m))
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub videos: Vec<VideoData>,
}

fn derr(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset { path: path.to_path_buf(), message: message.into() }
}

/// Loads and validates every video under `root` (or `root` itself when it holds a timeline).
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(derr(root, "dataset root is not a directory"));
    }
    let mut dirs = Vec::new();
    if root.join(TIMELINE_FILE).is_file() {
        dirs.push(root.to_path_buf());
    } else {
        let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        for e in entries {
            let p = e.map_err(|e| Error::io(root, e))?.path();
            if p.is_dir() && p.join(TIMELINE_FILE).is_file() {
                dirs.push(p);
            }
        }
        dirs.sort();
    }
    if dirs.is_empty() {
        return Err(derr(root, format!("no video directory with a {TIMELINE_FILE}")));
    }
    let videos = dirs.iter().map(|d| load_video(d)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset { root: root.to_path_buf(), videos })
}

pub fn read_meta(dir: &Path) -> Result<VideoMeta> {
    let p = dir.join(META_FILE);
    if !p.is_file() {
        return Ok(VideoMeta::default());
    }
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: p, source: e })
}

pub fn load_video(dir: &Path) -> Result<VideoData> {
    let video_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".into());
    let meta = read_meta(dir)?;
    let fps = parse_fps(&meta.fps).map_err(|e| derr(&dir.join(META_FILE), e.to_string()))?;
    let tl_path = dir.join(TIMELINE_FILE);
    let timeline = read_timeline_csv(&tl_path, &video_id, fps)?;
    let violations = timeline.validate();
    if let Some(v) = violations.first() {
        return Err(derr(&tl_path, v.to_string()));
    }
    for w in timeline.frames.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(derr(&tl_path, format!("frames not contiguous between {} and {}", w[0], w[1])));
        }
    }
    for (f, p) in &timeline.phase_of {
        if meta.phases.as_ref().is_some_and(|s| !s.contains(p)) {
            return Err(derr(&tl_path, format!("frame {f}: unknown phase id {p}")));
        }
    }
    for (f, s) in &timeline.step_of {
        if meta.steps.as_ref().is_some_and(|set| !set.contains(s)) {
            return Err(derr(&tl_path, format!("frame {f}: unknown step id {s}")));
        }
    }
    if timeline.key_frames.is_empty() {
        return Err(derr(&tl_path, "no key frames"));
    }
    let mut dims: Option<(usize, usize)> = None;
    for &f in &timeline.frames {
        let p = dir.join(FRAMES_DIR).join(format!("{}.png", frame_stem(f)));
        let (w, h) = image::image_dimensions(&p).map_err(|e| derr(&p, format!("frame {f}: {e}")))?;
        let d = (w as usize, h as usize);
        match dims {
            None => dims = Some(d),
            Some(prev) if prev != d => return Err(derr(&p, format!("frame is {d:?}, earlier frames are {prev:?}"))),
            _ => {}
        }
    }
    let dims = dims.expect("timeline has frames");
    let kind = meta.kind();
    let mut key_masks = BTreeMap::new();
    for &k in &timeline.key_frames {
        let p = dir.join(MASKS_DIR).join(format!("{}.png", frame_stem(k)));
        if !p.is_file() {
            return Err(derr(&p, format!("missing mask for key frame {k}")));
        }
        let m = read_mask_png(&p, &kind)?;
        if m.dims() != dims {
            return Err(derr(&p, format!("mask is {:?}, frames are {dims:?}", m.dims())));
        }
        if let (Some(c), MaskKind::Semantic) = (meta.classes, &kind) {
            if let Some(bad) = m.data().iter().find(|&&id| id != VOID_ID && id as u32 >= c) {
                return Err(derr(&p, format!("label {bad} outside the {c} declared classes")));
            }
        }
        key_masks.insert(k, m);
    }
    Ok(VideoData { dir: dir.to_path_buf(), meta, timeline, key_masks, dims })
}
