//! Readers for evaluation inputs: detections, per-frame scores and labels, remaining-time
//! series and mask directories.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{BBox, Detection, MaskKind};

use super::raster::read_mask_png;

fn derr(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset { path: path.to_path_buf(), message: message.into() }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DetRecord {
    frame: u32,
    /// `[x_min, y_min, x_max, y_max]`.
    bbox: [f64; 4],
    class_id: u32,
    #[serde(default = "one")]
    score: f64,
    /// Instance mask PNG, relative to the JSON file.
    #[serde(default)]
    mask: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

/// Reads a JSON array of `{frame, bbox, class_id, score?, mask?}` records.
pub fn read_detections_json(path: &Path) -> Result<Vec<Detection>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let recs: Vec<DetRecord> = serde_json::from_str(&text).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
    let base = path.parent().unwrap_or(Path::new("."));
    recs.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let [x0, y0, x1, y1] = r.bbox;
            let bbox = BBox::new(x0, y0, x1, y1).map_err(|e| derr(path, format!("record {i}: {e}")))?;
            if !r.score.is_finite() {
                return Err(derr(path, format!("record {i}: score is not finite")));
            }
            let mask = match r.mask {
                Some(m) => Some(read_mask_png(&base.join(m), &MaskKind::Semantic)?),
                None => None,
            };
            Ok(Detection { frame: r.frame, bbox, class_id: r.class_id, score: r.score, mask })
        })
        .collect()
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })
}

fn parse<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| derr(path, format!("line {line}: cannot parse `{s}`")))
}

/// `frame,<score columns...>`; every row must have the same width.
pub fn read_scores_csv(path: &Path) -> Result<BTreeMap<u32, Vec<f64>>> {
    let mut rdr = open_csv(path)?;
    let width = rdr.headers().map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?.len();
    if width < 2 {
        return Err(derr(path, "need a frame column and at least one score column"));
    }
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| derr(path, format!("line {line}: {e}")))?;
        let frame: u32 = parse(path, line, &rec[0])?;
        let scores = rec.iter().skip(1).map(|s| parse::<f64>(path, line, s)).collect::<Result<Vec<_>>>()?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(derr(path, format!("line {line}: non-finite score")));
        }
        if out.insert(frame, scores).is_some() {
            return Err(derr(path, format!("line {line}: duplicate frame {frame}")));
        }
    }
    Ok(out)
}

/// Two-column `frame,<value>` file.
fn read_pairs<V: std::str::FromStr>(path: &Path) -> Result<BTreeMap<u32, V>> {
    let mut rdr = open_csv(path)?;
    let width = rdr.headers().map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?.len();
    if width != 2 {
        return Err(derr(path, format!("expected 2 columns, found {width}")));
    }
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| derr(path, format!("line {line}: {e}")))?;
        let frame: u32 = parse(path, line, &rec[0])?;
        if out.insert(frame, parse(path, line, &rec[1])?).is_some() {
            return Err(derr(path, format!("line {line}: duplicate frame {frame}")));
        }
    }
    Ok(out)
}

/// `frame,label` with integer class labels.
pub fn read_labels_csv(path: &Path) -> Result<BTreeMap<u32, usize>> {
    read_pairs(path)
}

/// `frame,remaining` with remaining time in seconds.
pub fn read_series_csv(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let m: BTreeMap<u32, f64> = read_pairs(path)?;
    if let Some((f, _)) = m.iter().find(|(_, v)| !v.is_finite()) {
        return Err(derr(path, format!("frame {f}: non-finite value")));
    }
    Ok(m)
}

/// PNG files of a directory keyed by file stem.
pub fn list_pngs(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            if let Some(stem) = p.file_stem() {
                out.insert(stem.to_string_lossy().into_owned(), p);
            }
        }
    }
    Ok(out)
}

/// Errors unless both key sets are equal; the message lists what is missing on each side.
pub fn require_same_keys<K: Ord + std::fmt::Display + Clone, A, B>(
    pred: &BTreeMap<K, A>,
    gt: &BTreeMap<K, B>,
    what: &str,
) -> Result<()> {
    let p: BTreeSet<K> = pred.keys().cloned().collect();
    let g: BTreeSet<K> = gt.keys().cloned().collect();
    if p == g {
        return Ok(());
    }
    let list = |s: Vec<&K>| {
        let mut v: Vec<String> = s.iter().take(10).map(|k| k.to_string()).collect();
        if s.len() > 10 {
            v.push(format!("... ({} total)", s.len()));
        }
        v.join(", ")
    };
    let only_p: Vec<&K> = p.difference(&g).collect();
    let only_g: Vec<&K> = g.difference(&p).collect();
    Err(Error::InvalidData(format!(
        "{what} mismatch: only in predictions [{}]; only in ground truth [{}]",
        list(only_p),
        list(only_g)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detections_parse_and_default_score() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        std::fs::write(&p, r#"[{"frame":0,"bbox":[0,0,4,4],"class_id":1},{"frame":1,"bbox":[1,1,3,5],"class_id":2,"score":0.4}]"#).unwrap();
        let d = read_detections_json(&p).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].score, 1.0);
        assert_eq!(d[1].bbox.y_max, 5.0);
    }

    #[test]
    fn degenerate_box_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        std::fs::write(&p, r#"[{"frame":0,"bbox":[4,0,4,4],"class_id":1}]"#).unwrap();
        assert!(read_detections_json(&p).is_err());
    }

    #[test]
    fn csv_readers() {
        let dir = tempfile::tempdir().unwrap();
        let s = dir.path().join("s.csv");
        std::fs::write(&s, "frame,a,b\n1,0.2,0.8\n0,0.9,0.1\n").unwrap();
        let m = read_scores_csv(&s).unwrap();
        assert_eq!(m[&0], vec![0.9, 0.1]);
        let l = dir.path().join("l.csv");
        std::fs::write(&l, "frame,label\n0,1\n0,2\n").unwrap();
        assert!(read_labels_csv(&l).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn key_mismatch_message_lists_both_sides() {
        let a: BTreeMap<u32, ()> = [(1, ()), (2, ())].into_iter().collect();
        let b: BTreeMap<u32, ()> = [(2, ()), (3, ())].into_iter().collect();
        let e = require_same_keys(&a, &b, "frame set").unwrap_err().to_string();
        assert!(e.contains("only in predictions [1]") && e.contains("only in ground truth [3]"), "{e}");
    }
}
