//! Per-video frame timelines: frame indices, key-frame marks and per-frame workflow labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Frame rate as an exact positive rational (e.g. `30/1`, `30000/1001`).
pub type Fps = Ratio<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameTimeline {
    pub video_id: String,
    pub fps: Fps,
    /// Strictly increasing frame indices.
    pub frames: Vec<u32>,
    pub key_frames: BTreeSet<u32>,
    pub phase_of: BTreeMap<u32, u32>,
    pub step_of: BTreeMap<u32, u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    FpsNotPositive,
    FramesNotIncreasing,
    KeyFrameNotInFrames,
    MissingPhase,
    MissingStep,
    LabelForUnknownFrame,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::FpsNotPositive => "fps must be positive",
            Rule::FramesNotIncreasing => "frames not strictly increasing",
            Rule::KeyFrameNotInFrames => "key frame not in frame list",
            Rule::MissingPhase => "missing phase",
            Rule::MissingStep => "missing step",
            Rule::LabelForUnknownFrame => "label for frame not in frame list",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub frame: Option<u32>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(frame) => write!(f, "frame {frame}: {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

/// Key frame chosen as the propagation source for some target frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyFrameRef {
    pub key: u32,
    /// `target - key`; positive when the target lies after the key frame.
    pub offset: i64,
}

impl KeyFrameRef {
    pub fn hop(&self) -> u32 {
        self.offset.unsigned_abs() as u32
    }
}

impl FrameTimeline {
    /// Contiguous timeline `0..n` with every frame in phase 0 / step 0 and no key frames.
    pub fn contiguous(video_id: impl Into<String>, fps: Fps, n: u32) -> Self {
        let frames: Vec<u32> = (0..n).collect();
        FrameTimeline {
            video_id: video_id.into(),
            fps,
            phase_of: frames.iter().map(|&f| (f, 0)).collect(),
            step_of: frames.iter().map(|&f| (f, 0)).collect(),
            frames,
            key_frames: BTreeSet::new(),
        }
    }

    pub fn contains(&self, frame: u32) -> bool {
        self.frames.binary_search(&frame).is_ok()
    }

    pub fn is_key(&self, frame: u32) -> bool {
        self.key_frames.contains(&frame)
    }

    /// Time stamp of `frame` in seconds.
    pub fn seconds(&self, frame: u32) -> f64 {
        frame as f64 * *self.fps.denom() as f64 / *self.fps.numer() as f64
    }

    /// Elapsed seconds from frame `from` to frame `to` (negative when `to < from`).
    pub fn seconds_between(&self, from: u32, to: u32) -> f64 {
        (to as f64 - from as f64) * *self.fps.denom() as f64 / *self.fps.numer() as f64
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_timeline(self)
    }

    /// Returns `self` if it has no violations, else a data error listing them.
    pub fn validated(self) -> Result<Self> {
        let v = validate_timeline(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::InvalidData(format!(
                "timeline `{}`: {}",
                self.video_id,
                msg.join("; ")
            )))
        }
    }
}

/// Checks every timeline invariant; an empty result means the timeline is well formed.
pub fn validate_timeline(t: &FrameTimeline) -> Vec<Violation> {
    let mut out = Vec::new();
    if *t.fps.numer() == 0 {
        out.push(Violation { frame: None, rule: Rule::FpsNotPositive });
    }
    for w in t.frames.windows(2) {
        if w[1] <= w[0] {
            out.push(Violation { frame: Some(w[1]), rule: Rule::FramesNotIncreasing });
        }
    }
    let known: BTreeSet<u32> = t.frames.iter().copied().collect();
    for &k in &t.key_frames {
        if !known.contains(&k) {
            out.push(Violation { frame: Some(k), rule: Rule::KeyFrameNotInFrames });
        }
    }
    for &f in &t.frames {
        if !t.phase_of.contains_key(&f) {
            out.push(Violation { frame: Some(f), rule: Rule::MissingPhase });
        }
        if !t.step_of.contains_key(&f) {
            out.push(Violation { frame: Some(f), rule: Rule::MissingStep });
        }
    }
    for &f in t.phase_of.keys().chain(t.step_of.keys()) {
        if !known.contains(&f) {
            let v = Violation { frame: Some(f), rule: Rule::LabelForUnknownFrame };
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

/// Nearest key frame to `frame`; equidistant candidates resolve to the earlier key frame.
pub fn nearest_key_frame(t: &FrameTimeline, frame: u32) -> Result<KeyFrameRef> {
    if t.key_frames.is_empty() {
        return Err(Error::NoKeyFrames);
    }
    if !t.contains(frame) {
        return Err(Error::UnknownFrame(frame));
    }
    let before = t.key_frames.range(..=frame).next_back().copied();
    let after = t.key_frames.range(frame..).next().copied();
    let key = match (before, after) {
        (Some(b), Some(a)) => {
            if frame - b <= a - frame {
                b
            } else {
                a
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => unreachable!("key set is non-empty"),
    };
    Ok(KeyFrameRef { key, offset: frame as i64 - key as i64 })
}
