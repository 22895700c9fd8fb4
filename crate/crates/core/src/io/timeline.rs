use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Fps, FrameTimeline};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    frame: u32,
    phase: u32,
    step: u32,
    is_key: String,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn dataset_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset { path: path.to_path_buf(), message: message.into() }
}

/// Reads a `frame,phase,step,is_key` CSV. Rows may come in any order; duplicates are rejected.
pub fn read_timeline_csv(path: &Path, video_id: &str, fps: Fps) -> Result<FrameTimeline> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
    let headers = rdr.headers().map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?.clone();
    if headers.iter().collect::<Vec<_>>() != ["frame", "phase", "step", "is_key"] {
        return Err(dataset_err(path, format!("header must be `frame,phase,step,is_key`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows: BTreeMap<u32, Row> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| dataset_err(path, format!("line {line}: {e}")))?;
        if parse_flag(&row.is_key).is_none() {
            return Err(dataset_err(path, format!("line {line}: is_key `{}` is not 0/1", row.is_key)));
        }
        if rows.contains_key(&row.frame) {
            return Err(dataset_err(path, format!("line {line}: duplicate frame {}", row.frame)));
        }
        rows.insert(row.frame, row);
    }
    let mut t = FrameTimeline {
        video_id: video_id.to_string(),
        fps,
        frames: rows.keys().copied().collect(),
        key_frames: Default::default(),
        phase_of: Default::default(),
        step_of: Default::default(),
    };
    for (f, r) in rows {
        t.phase_of.insert(f, r.phase);
        t.step_of.insert(f, r.step);
        if parse_flag(&r.is_key) == Some(true) {
            t.key_frames.insert(f);
        }
    }
    Ok(t)
}

pub fn write_timeline_csv(t: &FrameTimeline, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
    for &f in &t.frames {
        let row = Row {
            frame: f,
            phase: t.phase_of.get(&f).copied().unwrap_or(0),
            step: t.step_of.get(&f).copied().unwrap_or(0),
            is_key: if t.is_key(f) { "1" } else { "0" }.into(),
        };
        w.serialize(row).map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses `"30"` or `"30000/1001"`.
pub fn parse_fps(s: &str) -> Result<Fps> {
    let bad = || Error::InvalidData(format!("fps `{s}` is not a positive integer or ratio"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<u32>().map_err(|_| bad())?, d.trim().parse::<u32>().map_err(|_| bad())?),
        None => (s.trim().parse::<u32>().map_err(|_| bad())?, 1),
    };
    if n == 0 || d == 0 {
        return Err(bad());
    }
    Ok(Fps::new(n, d))
}

pub fn format_fps(f: Fps) -> String {
    if *f.denom() == 1 {
        f.numer().to_string()
    } else {
        format!("{}/{}", f.numer(), f.denom())
    }
}
