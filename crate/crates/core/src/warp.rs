//! Backward warping of key-frame masks onto target frames and timeline-wide propagation.
//!
//! Labels at a target frame `t` are gathered from the key frame `k` through the `t → k`
//! field: `out(q) = mask_k(round(q + F_tk(q)))`. Gathering avoids the holes and collisions
//! that splatting along `k → t` would produce.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{compose_flows, forward_backward_confidence, ConsistencyParams, FlowField};
use crate::model::{nearest_key_frame, ConfidenceMap, FrameTimeline, LabelMask, VOID_ID};
use crate::raster::GrayImage;
use crate::scalar::Scalar;

/// Anything that can produce the displacement field `from → to`.
pub trait FlowSource<T: Scalar>: Sync {
    fn flow(&self, from: u32, to: u32) -> Result<FlowField<T>>;

    /// Grayscale pixels of `frame`, when the source has them; enables the brightness cue.
    fn frame(&self, _frame: u32) -> Option<GrayImage<T>> {
        None
    }
}

impl<T: Scalar, F> FlowSource<T> for F
where
    F: Fn(u32, u32) -> Result<FlowField<T>> + Sync,
{
    fn flow(&self, from: u32, to: u32) -> Result<FlowField<T>> {
        self(from, to)
    }
}

/// Memoises another source; useful when chained propagation requests the same
/// adjacent pairs for many targets.
pub struct CachedFlows<'a, T: Scalar> {
    inner: &'a dyn FlowSource<T>,
    cache: Mutex<HashMap<(u32, u32), Arc<FlowField<T>>>>,
}

impl<'a, T: Scalar> CachedFlows<'a, T> {
    pub fn new(inner: &'a dyn FlowSource<T>) -> Self {
        CachedFlows { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, from: u32, to: u32) -> Result<Arc<FlowField<T>>> {
        if let Some(f) = self.cache.lock().expect("cache lock").get(&(from, to)) {
            return Ok(Arc::clone(f));
        }
        let f = Arc::new(self.inner.flow(from, to)?);
        self.cache.lock().expect("cache lock").insert((from, to), Arc::clone(&f));
        Ok(f)
    }
}

impl<T: Scalar> FlowSource<T> for CachedFlows<'_, T> {
    fn flow(&self, from: u32, to: u32) -> Result<FlowField<T>> {
        self.get(from, to).map(|f| (*f).clone())
    }

    fn frame(&self, frame: u32) -> Option<GrayImage<T>> {
        self.inner.frame(frame)
    }
}

/// Gathers labels for the frame `flow_tk.direction().source` from the mask of `key_frame`.
///
/// Lookups that round outside the key raster yield void with confidence 0; elsewhere the
/// output confidence is the input confidence unchanged.
pub fn warp_mask<T: Scalar>(
    mask_k: &LabelMask,
    key_frame: u32,
    flow_tk: &FlowField<T>,
    conf: &ConfidenceMap<T>,
) -> Result<(LabelMask, ConfidenceMap<T>)> {
    flow_tk.check_dims(mask_k.dims(), "flow vs key mask")?;
    if conf.dims() != mask_k.dims() {
        return Err(Error::dims("confidence vs key mask", conf.dims(), mask_k.dims()));
    }
    if flow_tk.direction().target != key_frame {
        return Err(Error::Direction(format!(
            "warping needs a field ending at key frame {key_frame}, got {:?}",
            flow_tk.direction()
        )));
    }
    let (w, h) = mask_k.dims();
    let mut labels = Vec::with_capacity(w * h);
    let mut out_conf = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (fx, fy) = flow_tk.get(u, v);
            let x = (T::count(u) + fx).round();
            let y = (T::count(v) + fy).round();
            let inside = x >= T::zero()
                && y >= T::zero()
                && x <= T::count(w - 1)
                && y <= T::count(h - 1);
            if inside {
                let (xs, ys) = (x.to_usize().expect("in range"), y.to_usize().expect("in range"));
                labels.push(mask_k.get(xs, ys));
                out_conf.push(conf.get(u, v));
            } else {
                labels.push(VOID_ID);
                out_conf.push(T::zero());
            }
        }
    }
    Ok((mask_k.with_data(labels)?, ConfidenceMap::new(w, h, out_conf)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowChain {
    /// One field straight from the target to its key frame.
    Direct,
    /// Adjacent-frame fields composed into one `t → k` field, then a single warp.
    Composed,
    /// The mask itself is warped one adjacent frame at a time, re-rounding every hop.
    #[default]
    Hopwise,
}

/// Default brightness tolerance of the occlusion test, in grey levels.
pub const DEFAULT_BRIGHTNESS_TOL: f64 = 12.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    /// Frames farther than this from every key frame stay uncovered.
    pub max_hop: u32,
    pub chain: FlowChain,
    /// Forward–backward confidence; `None` trusts every in-bounds lookup fully.
    pub consistency: Option<ConsistencyParams>,
    /// Lookups whose brightness differs by more than this (0–255 scale) are treated as
    /// occluded. Needs a source that provides frames; ignored otherwise.
    pub brightness_tol: Option<f64>,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            max_hop: 15,
            chain: FlowChain::Hopwise,
            consistency: Some(ConsistencyParams::default()),
            brightness_tol: Some(DEFAULT_BRIGHTNESS_TOL),
        }
    }
}

/// Warped label for one frame with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagated<T: Scalar> {
    pub frame: u32,
    pub mask: LabelMask,
    pub confidence: ConfidenceMap<T>,
    pub source_key: u32,
    pub hop: u32,
    pub covered: bool,
}

fn pair_confidence<T: Scalar>(
    flows: &CachedFlows<'_, T>,
    field: &FlowField<T>,
    cfg: &PropagationConfig,
) -> Result<ConfidenceMap<T>> {
    let fb = fb_confidence(flows, field, cfg.consistency.as_ref())?;
    let Some(tol) = cfg.brightness_tol else {
        return Ok(fb);
    };
    let d = field.direction();
    let (Some(a), Some(b)) = (flows.frame(d.source), flows.frame(d.target)) else {
        return Ok(fb);
    };
    if a.dims() != field.dims() || b.dims() != field.dims() {
        return Err(Error::dims("frame vs flow", a.dims(), field.dims()));
    }
    let tol = T::lit(tol);
    let (w, h) = field.dims();
    let mut c = fb.into_data();
    for v in 0..h {
        for u in 0..w {
            let (fx, fy) = field.get(u, v);
            // compare against the pixel the label lookup will actually copy
            let x = (T::count(u) + fx).round().max(T::zero()).min(T::count(w - 1));
            let y = (T::count(v) + fy).round().max(T::zero()).min(T::count(h - 1));
            let looked_up = b.get(x.to_usize().expect("clamped"), y.to_usize().expect("clamped"));
            if (looked_up - a.get(u, v)).abs() > tol {
                c[v * w + u] = T::zero();
            }
        }
    }
    ConfidenceMap::new(w, h, c)
}

/// Soft forward–backward confidence, zeroed where the hard test fails.
fn fb_confidence<T: Scalar>(
    flows: &CachedFlows<'_, T>,
    field: &FlowField<T>,
    params: Option<&ConsistencyParams>,
) -> Result<ConfidenceMap<T>> {
    let (w, h) = field.dims();
    match params {
        None => Ok(ConfidenceMap::ones(w, h)),
        Some(p) => {
            let d = field.direction();
            let back = flows.get(d.target, d.source)?;
            let fb = forward_backward_confidence(field, &back, p)?;
            let (w, h) = field.dims();
            let gated = fb
                .confidence
                .data()
                .iter()
                .zip(&fb.valid)
                .map(|(&c, &ok)| if ok { c } else { T::zero() })
                .collect();
            ConfidenceMap::new(w, h, gated)
        }
    }
}

/// `t → k` field and its accumulated confidence, following `cfg.chain`.
pub fn flow_to_key<T: Scalar>(
    timeline: &FrameTimeline,
    flows: &CachedFlows<'_, T>,
    target: u32,
    key: u32,
    cfg: &PropagationConfig,
) -> Result<(FlowField<T>, ConfidenceMap<T>)> {
    match cfg.chain {
        FlowChain::Direct => {
            let f = flows.get(target, key)?;
            let c = pair_confidence(flows, &f, cfg)?;
            Ok(((*f).clone(), c))
        }
        FlowChain::Composed | FlowChain::Hopwise => {
            let path: Vec<u32> = if target < key {
                timeline.frames.iter().copied().filter(|&f| f >= target && f <= key).collect()
            } else {
                timeline.frames.iter().rev().copied().filter(|&f| f <= target && f >= key).collect()
            };
            let first = flows.get(path[0], path[1])?;
            let mut acc = (*first).clone();
            let mut conf = pair_confidence(flows, &first, cfg)?;
            for hop in path[1..].windows(2) {
                let step = flows.get(hop[0], hop[1])?;
                let step_conf = pair_confidence(flows, &step, cfg)?;
                let composed = compose_flows(&acc, &step)?;
                let (w, h) = acc.dims();
                let mut c = Vec::with_capacity(w * h);
                for v in 0..h {
                    for u in 0..w {
                        let i = v * w + u;
                        if !composed.valid[i] {
                            c.push(T::zero());
                            continue;
                        }
                        let (fx, fy) = acc.get(u, v);
                        let sampled = step_conf.sample_bilinear(T::count(u) + fx, T::count(v) + fy);
                        c.push(conf.data()[i] * sampled);
                    }
                }
                conf = ConfidenceMap::from_clamped(w, h, c)?;
                acc = composed.field;
            }
            Ok((acc, conf))
        }
    }
}

/// Runs `f` on a rayon pool with `jobs` workers (`None` = global pool).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

/// Propagates key-frame masks to every frame of the timeline.
///
/// Each non-key frame within `cfg.max_hop` of a key frame takes the warped mask of its
/// nearest key (earlier key on ties). Farther frames get an all-void mask flagged uncovered.
pub fn propagate_labels<T: Scalar>(
    timeline: &FrameTimeline,
    key_masks: &BTreeMap<u32, LabelMask>,
    source: &dyn FlowSource<T>,
    cfg: &PropagationConfig,
    jobs: Option<usize>,
) -> Result<BTreeMap<u32, Propagated<T>>> {
    if cfg.max_hop < 1 {
        return Err(Error::InvalidParam { name: "max_hop", reason: "must be >= 1".into() });
    }
    if let Some(p) = &cfg.consistency {
        p.validate()?;
    }
    for &k in &timeline.key_frames {
        if !key_masks.contains_key(&k) {
            return Err(Error::MissingKeyMask { frame: k });
        }
    }
    let first = timeline
        .key_frames
        .iter()
        .next()
        .and_then(|k| key_masks.get(k))
        .ok_or(Error::NoKeyFrames)?;
    let dims = first.dims();
    for (k, m) in key_masks {
        if m.dims() != dims {
            return Err(Error::InvalidData(format!("key mask {k} is {:?}, expected {:?}", m.dims(), dims)));
        }
    }
    let flows = CachedFlows::new(source);
    let mut out = BTreeMap::new();
    let mut per_frame = Vec::new();
    let mut segments: BTreeMap<(u32, bool), Vec<u32>> = BTreeMap::new();
    for &frame in &timeline.frames {
        let near = nearest_key_frame(timeline, frame)?;
        let hop = near.hop();
        if hop == 0 || hop > cfg.max_hop {
            out.insert(frame, static_label(key_masks, frame, near.key, hop));
        } else if cfg.chain == FlowChain::Hopwise {
            segments.entry((near.key, frame > near.key)).or_default().push(frame);
        } else {
            per_frame.push((frame, near.key, hop));
        }
    }
    // adjacent pairs each chain step needs (plus reverses for the consistency check),
    // estimated up front so segments do not serialise on flow computation
    let mut pairs = Vec::new();
    for (&(key, forward), frames) in &segments {
        let mut prev = key;
        let mut ordered = frames.clone();
        if !forward {
            ordered.reverse();
        }
        for f in ordered {
            pairs.push((f, prev));
            if cfg.consistency.is_some() {
                pairs.push((prev, f));
            }
            prev = f;
        }
    }
    with_jobs(jobs, || pairs.par_iter().try_for_each(|&(a, b)| flows.get(a, b).map(|_| ())))?;
    let results: Vec<Result<Vec<Propagated<T>>>> = with_jobs(jobs, || {
        let singles = per_frame.par_iter().map(|&(frame, key, hop)| {
            let (field, conf) = flow_to_key(timeline, &flows, frame, key, cfg)?;
            let (mask, confidence) = warp_mask(&key_masks[&key], key, &field, &conf)?;
            let mask = void_where_unsupported(mask, &confidence)?;
            Ok(vec![Propagated { frame, mask, confidence, source_key: key, hop, covered: true }])
        });
        let chains = segments.par_iter().map(|(&(key, forward), frames)| {
            let mut ordered = frames.clone();
            if !forward {
                ordered.reverse();
            }
            hopwise_segment(&flows, key_masks, key, &ordered, cfg)
        });
        singles.chain(chains).collect()
    });
    for r in results {
        for p in r? {
            out.insert(p.frame, p);
        }
    }
    Ok(out)
}

/// Voids labels whose confidence dropped to exactly zero (out of view or inconsistent).
fn void_where_unsupported<T: Scalar>(mask: LabelMask, conf: &ConfidenceMap<T>) -> Result<LabelMask> {
    if conf.data().iter().all(|&c| c > T::zero()) {
        return Ok(mask);
    }
    let data = mask
        .data()
        .iter()
        .zip(conf.data())
        .map(|(&l, &c)| if c > T::zero() { l } else { VOID_ID })
        .collect();
    mask.with_data(data)
}

/// Key frames keep their mask at full confidence; frames out of range are all void.
fn static_label<T: Scalar>(key_masks: &BTreeMap<u32, LabelMask>, frame: u32, key: u32, hop: u32) -> Propagated<T> {
    let key_mask = &key_masks[&key];
    let (w, h) = key_mask.dims();
    if hop == 0 {
        Propagated {
            frame,
            mask: key_mask.clone(),
            confidence: ConfidenceMap::ones(w, h),
            source_key: key,
            hop,
            covered: true,
        }
    } else {
        Propagated {
            frame,
            mask: LabelMask::all_void(w, h, key_mask.kind().clone()),
            confidence: ConfidenceMap::zeros(w, h),
            source_key: key,
            hop,
            covered: false,
        }
    }
}

/// Walks outward from `key` through `frames` (ordered by increasing distance), warping the
/// previous frame's label through each adjacent field.
fn hopwise_segment<T: Scalar>(
    flows: &CachedFlows<'_, T>,
    key_masks: &BTreeMap<u32, LabelMask>,
    key: u32,
    frames: &[u32],
    cfg: &PropagationConfig,
) -> Result<Vec<Propagated<T>>> {
    let key_mask = &key_masks[&key];
    let (w, h) = key_mask.dims();
    let mut prev_frame = key;
    let mut prev_mask = key_mask.clone();
    let mut prev_conf = ConfidenceMap::<T>::ones(w, h);
    let mut out = Vec::with_capacity(frames.len());
    for &frame in frames {
        let step = flows.get(frame, prev_frame)?;
        let step_conf = pair_confidence(flows, &step, cfg)?;
        let mut c = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let (fx, fy) = step.get(u, v);
                let carried = prev_conf.sample_bilinear(T::count(u) + fx, T::count(v) + fy);
                c.push(step_conf.get(u, v) * carried);
            }
        }
        let conf = ConfidenceMap::from_clamped(w, h, c)?;
        let (mask, confidence) = warp_mask(&prev_mask, prev_frame, &step, &conf)?;
        let mask = void_where_unsupported(mask, &confidence)?;
        let hop = frame.abs_diff(key);
        out.push(Propagated { frame, mask: mask.clone(), confidence: confidence.clone(), source_key: key, hop, covered: true });
        prev_frame = frame;
        prev_mask = mask;
        prev_conf = confidence;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowDirection;
    use crate::model::{Fps, MaskKind};

    fn single_pixel_mask() -> LabelMask {
        let mut d = vec![0u8; 100];
        d[5 * 10 + 5] = 3;
        LabelMask::semantic(10, 10, d).unwrap()
    }

    #[test]
    fn backward_sampling_moves_label() {
        let m = single_pixel_mask();
        let f = FlowField::constant(10, 10, -2.0f64, 0.0, FlowDirection::new(1, 0));
        let (out, conf) = warp_mask(&m, 0, &f, &ConfidenceMap::ones(10, 10)).unwrap();
        assert_eq!(out.get(7, 5), 3);
        assert_eq!(out.get(5, 5), 0);
        // leftmost two columns look outside the key raster
        assert_eq!(out.get(0, 3), VOID_ID);
        assert_eq!(out.get(1, 3), VOID_ID);
        assert_eq!(conf.get(1, 3), 0.0);
        assert_eq!(conf.get(2, 3), 1.0);
    }

    #[test]
    fn zero_flow_is_identity() {
        let m = single_pixel_mask();
        let c = ConfidenceMap::from_clamped(10, 10, (0..100).map(|i| i as f64 / 100.0).collect()).unwrap();
        let f = FlowField::zeros(10, 10, FlowDirection::new(4, 0));
        let (out, conf) = warp_mask(&m, 0, &f, &c).unwrap();
        assert_eq!(out, m);
        assert_eq!(conf, c);
    }

    #[test]
    fn wrong_direction_rejected() {
        let m = single_pixel_mask();
        let f = FlowField::<f32>::zeros(10, 10, FlowDirection::new(0, 4));
        assert!(matches!(
            warp_mask(&m, 0, &f, &ConfidenceMap::ones(10, 10)),
            Err(Error::Direction(_))
        ));
    }

    #[test]
    fn instance_kind_preserved() {
        let map = [(7u8, 2u8)].into_iter().collect();
        let m = LabelMask::new(2, 1, vec![7, VOID_ID], MaskKind::Instance { class_of_instance: map }).unwrap();
        let f = FlowField::constant(2, 1, 1.0f32, 0.0, FlowDirection::new(1, 0));
        let (out, _) = warp_mask(&m, 0, &f, &ConfidenceMap::ones(2, 1)).unwrap();
        assert_eq!(out.kind(), m.kind());
        assert_eq!(out.data(), &[VOID_ID, VOID_ID]);
    }

    fn zero_source(w: usize, h: usize) -> impl Fn(u32, u32) -> Result<FlowField<f32>> + Sync {
        move |a, b| Ok(FlowField::zeros(w, h, FlowDirection::new(a, b)))
    }

    #[test]
    fn nearest_key_assignment_and_coverage() {
        let mut t = FrameTimeline::contiguous("v", Fps::from_integer(30), 31);
        t.key_frames = [0, 30].into_iter().collect();
        let masks: BTreeMap<u32, LabelMask> = [
            (0, LabelMask::filled(4, 4, 1, MaskKind::Semantic).unwrap()),
            (30, LabelMask::filled(4, 4, 2, MaskKind::Semantic).unwrap()),
        ]
        .into_iter()
        .collect();
        let src = zero_source(4, 4);
        let out = propagate_labels(&t, &masks, &src, &PropagationConfig::default(), Some(2)).unwrap();
        for f in 1..=15 {
            assert_eq!(out[&f].source_key, 0);
            assert_eq!(out[&f].mask.data()[0], 1);
        }
        for f in 16..30 {
            assert_eq!(out[&f].source_key, 30);
            assert_eq!(out[&f].mask.data()[0], 2);
        }
        assert!(out.values().all(|p| p.covered));
    }

    #[test]
    fn frames_beyond_max_hop_uncovered() {
        let mut t = FrameTimeline::contiguous("v", Fps::from_integer(30), 100);
        t.key_frames = [0].into_iter().collect();
        let masks = [(0, LabelMask::filled(4, 4, 1, MaskKind::Semantic).unwrap())].into_iter().collect();
        let cfg = PropagationConfig { max_hop: 10, chain: FlowChain::Direct, consistency: None, brightness_tol: None };
        let out = propagate_labels(&t, &masks, &zero_source(4, 4), &cfg, None).unwrap();
        for f in 0..100u32 {
            assert_eq!(out[&f].covered, f <= 10, "frame {f}");
        }
        assert_eq!(out[&50].mask.void_count(), 16);
        assert!(out[&50].confidence.data().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn missing_key_mask_is_error() {
        let mut t = FrameTimeline::contiguous("v", Fps::from_integer(30), 10);
        t.key_frames = [0, 5].into_iter().collect();
        let masks = [(0, LabelMask::filled(4, 4, 1, MaskKind::Semantic).unwrap())].into_iter().collect();
        let err = propagate_labels(&t, &masks, &zero_source(4, 4), &PropagationConfig::default(), None);
        assert!(matches!(err, Err(Error::MissingKeyMask { frame: 5 })));
    }

    #[test]
    fn unavailable_flow_is_error() {
        let mut t = FrameTimeline::contiguous("v", Fps::from_integer(30), 4);
        t.key_frames = [0].into_iter().collect();
        let masks = [(0, LabelMask::filled(4, 4, 1, MaskKind::Semantic).unwrap())].into_iter().collect();
        let src = |a: u32, b: u32| -> Result<FlowField<f32>> {
            Err(Error::FlowUnavailable { from: a, to: b, reason: "none".into() })
        };
        let err = propagate_labels(&t, &masks, &src, &PropagationConfig::default(), None);
        assert!(matches!(err, Err(Error::FlowUnavailable { .. })));
    }
}
