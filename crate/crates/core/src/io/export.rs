use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flow::save_flow;
use crate::fuse::save_prob;
use crate::model::nearest_key_frame;
use crate::synth::SynthScene;

use super::dataset::{
    flow_file_name, frame_stem, MaskKindName, VideoMeta, FLOWS_DIR, FRAMES_DIR, GT_MASKS_DIR, MASKS_DIR, META_FILE,
    PROBS_DIR, TIMELINE_FILE,
};
use super::raster::{write_mask_png, write_png};
use super::timeline::write_timeline_csv;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthExportOptions {
    /// Write analytic flow files for adjacent pairs and for every frame and its nearest key.
    pub flows: bool,
    /// Write probability maps with this peak on the true class.
    pub prob_peak: Option<f64>,
}

impl Default for SynthExportOptions {
    fn default() -> Self {
        SynthExportOptions { flows: true, prob_peak: None }
    }
}

/// Workflow labels attached to synthetic frames: phase switches at the midpoint,
/// the step alternates every ten frames.
pub fn synth_phase(scene: &SynthScene, frame: u32) -> u32 {
    u32::from(frame >= scene.frame_count / 2)
}

pub fn synth_step(frame: u32) -> u32 {
    (frame / 10) % 2
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes `scene` as a dataset video under `out/<video_id>` and returns that directory.
pub fn export_synth(scene: &SynthScene, out: &Path, opts: &SynthExportOptions) -> Result<PathBuf> {
    let dir = out.join(&scene.video_id);
    for sub in [FRAMES_DIR, MASKS_DIR, GT_MASKS_DIR] {
        mkdir(&dir.join(sub))?;
    }
    let mut t = scene.timeline();
    for &f in &t.frames {
        t.phase_of.insert(f, synth_phase(scene, f));
        t.step_of.insert(f, synth_step(f));
    }
    write_timeline_csv(&t, &dir.join(TIMELINE_FILE))?;
    let meta = VideoMeta {
        fps: scene.fps.to_string(),
        phases: Some(t.phase_of.values().copied().collect::<BTreeSet<_>>()),
        steps: Some(t.step_of.values().copied().collect::<BTreeSet<_>>()),
        classes: Some(scene.class_count() as u32),
        mask_kind: MaskKindName::Semantic,
        class_of_instance: Default::default(),
    };
    let p = dir.join(META_FILE);
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json { path: p.clone(), source: e })?;
    text.push('\n');
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;

    for &f in &t.frames {
        let stem = frame_stem(f);
        write_png(&scene.render(f), &dir.join(FRAMES_DIR).join(format!("{stem}.png")))?;
        let m = scene.mask(f);
        write_mask_png(&m, &dir.join(GT_MASKS_DIR).join(format!("{stem}.png")))?;
        if t.is_key(f) {
            write_mask_png(&m, &dir.join(MASKS_DIR).join(format!("{stem}.png")))?;
        }
    }
    if opts.flows {
        let fdir = dir.join(FLOWS_DIR);
        mkdir(&fdir)?;
        let mut pairs = BTreeSet::new();
        for w in t.frames.windows(2) {
            pairs.insert((w[0], w[1]));
            pairs.insert((w[1], w[0]));
        }
        for &f in &t.frames {
            let k = nearest_key_frame(&t, f)?.key;
            if k != f {
                pairs.insert((f, k));
                pairs.insert((k, f));
            }
        }
        for (a, b) in pairs {
            save_flow(&scene.flow::<f32>(a, b), fdir.join(flow_file_name(a, b)))?;
        }
    }
    if let Some(peak) = opts.prob_peak {
        let pdir = dir.join(PROBS_DIR);
        mkdir(&pdir)?;
        for &f in &t.frames {
            save_prob(&scene.prob_map::<f32>(f, peak), &pdir.join(format!("{}.prb", frame_stem(f))))?;
        }
    }
    Ok(dir)
}
