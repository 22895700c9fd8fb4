//! Dataset directories, pseudo-label output trees and evaluation inputs.

mod dataset;
mod eval;
mod export;
mod pseudo;
mod raster;
mod source;
mod timeline;

pub use dataset::{
    flow_file_name, frame_stem, load_dataset, load_video, read_meta, Dataset, MaskKindName, VideoData, VideoMeta,
    FLOWS_DIR, FRAMES_DIR, GT_MASKS_DIR, MASKS_DIR, META_FILE, PROBS_DIR, TIMELINE_FILE,
};
pub use eval::{list_pngs, read_detections_json, read_labels_csv, read_scores_csv, read_series_csv, require_same_keys};
pub use export::{export_synth, synth_phase, synth_step, SynthExportOptions};
pub use pseudo::{
    read_manifest, read_pseudo_labels, sha256_file, void_fraction, write_pseudo_labels, Manifest, ManifestEntry,
    PseudoLabelSet, Sidecar, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use raster::{
    load_confidence, read_confidence, read_frame, read_mask_png, read_rgb, save_confidence, write_confidence,
    write_mask_png, write_png, CONF_MAGIC,
};
pub use source::{FlowOrigin, VideoFlowSource};
pub use timeline::{format_fps, parse_fps, read_timeline_csv, write_timeline_csv};
