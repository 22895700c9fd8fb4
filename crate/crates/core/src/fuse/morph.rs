//! Binary morphology on label rasters and the refinement pass built from it.

use std::collections::BTreeMap;

use crate::model::{ConfidenceMap, LabelMask, VOID_ID};
use crate::scalar::Scalar;

use super::FusionParams;

/// Cap on refinement rounds; the pass normally settles in one or two.
const MAX_REFINE_ROUNDS: usize = 64;

/// Offsets of the discrete disk `dx² + dy² ≤ r² + r` (radius 1 gives the 3×3 square).
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let lim = r * r + r;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= lim {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Erosion; pixels outside the raster count as set, so regions touching the border keep it.
pub fn erode(b: &[bool], w: usize, h: usize, se: &[(isize, isize)]) -> Vec<bool> {
    morph(b, w, h, se, true)
}

/// Dilation; pixels outside the raster count as unset.
pub fn dilate(b: &[bool], w: usize, h: usize, se: &[(isize, isize)]) -> Vec<bool> {
    morph(b, w, h, se, false)
}

fn morph(b: &[bool], w: usize, h: usize, se: &[(isize, isize)], erosion: bool) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            let mut acc = erosion;
            for &(dx, dy) in se {
                let (x, y) = (u as isize + dx, v as isize + dy);
                let inside = x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h;
                let val = if inside { b[y as usize * w + x as usize] } else { erosion };
                if erosion && !val {
                    acc = false;
                    break;
                }
                if !erosion && val {
                    acc = true;
                    break;
                }
            }
            out[v * w + u] = acc;
        }
    }
    out
}

pub fn open(b: &[bool], w: usize, h: usize, se: &[(isize, isize)]) -> Vec<bool> {
    dilate(&erode(b, w, h, se), w, h, se)
}

pub fn close(b: &[bool], w: usize, h: usize, se: &[(isize, isize)]) -> Vec<bool> {
    erode(&dilate(b, w, h, se), w, h, se)
}

/// 8-connected components of `b`, as lists of pixel indices in scan order.
pub fn components(b: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !b[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (u + dx, v + dy);
                    if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
                        continue;
                    }
                    let j = y as usize * w + x as usize;
                    if b[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn refine_round(data: &[u8], w: usize, h: usize, priority: &BTreeMap<u8, f64>, p: &FusionParams) -> Vec<u8> {
    let se = disk_offsets(p.morph_radius);
    let labels: Vec<u8> = priority.keys().copied().collect();
    let smoothed: Vec<Vec<bool>> = labels
        .iter()
        .map(|&l| {
            let b: Vec<bool> = data.iter().map(|&x| x == l).collect();
            close(&open(&b, w, h, &se), w, h, &se)
        })
        .collect();
    let mut out = vec![VOID_ID; w * h];
    for i in 0..w * h {
        let mut best: Option<(usize, f64)> = None;
        for (li, &l) in labels.iter().enumerate() {
            if !smoothed[li][i] {
                continue;
            }
            if l == data[i] {
                best = Some((li, f64::INFINITY));
                break;
            }
            let pr = priority[&l];
            if best.map_or(true, |(_, bp)| pr > bp) {
                best = Some((li, pr));
            }
        }
        if let Some((li, _)) = best {
            out[i] = labels[li];
        }
    }
    for &l in &labels {
        let b: Vec<bool> = out.iter().map(|&x| x == l).collect();
        for comp in components(&b, w, h) {
            if comp.len() < p.min_component_px {
                for i in comp {
                    out[i] = VOID_ID;
                }
            }
        }
    }
    out
}

/// Per-label opening then closing, resolution of contested pixels, and removal of small
/// 8-connected components, repeated until the raster stops changing.
///
/// A contested pixel keeps its original label if that label still claims it; otherwise the
/// label with the higher mean confidence wins, then the lower id.
pub fn refine_with_confidence<T: Scalar>(
    mask: &LabelMask,
    conf: Option<&ConfidenceMap<T>>,
    params: &FusionParams,
) -> LabelMask {
    let (w, h) = mask.dims();
    let mut sums: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
    for (i, &l) in mask.data().iter().enumerate() {
        if l == VOID_ID {
            continue;
        }
        let c = conf.map_or(0.0, |c| c.data()[i].to_f64_lossy());
        let e = sums.entry(l).or_insert((0.0, 0));
        e.0 += c;
        e.1 += 1;
    }
    let priority: BTreeMap<u8, f64> = sums
        .into_iter()
        .map(|(l, (s, n))| (l, s / n as f64 - l as f64 * 1e-9))
        .collect();
    let mut data = mask.data().to_vec();
    for _ in 0..MAX_REFINE_ROUNDS {
        let next = refine_round(&data, w, h, &priority, params);
        if next == data {
            break;
        }
        data = next;
    }
    mask.with_data(data).expect("labels are a subset of the input")
}

pub fn refine(mask: &LabelMask, params: &FusionParams) -> LabelMask {
    refine_with_confidence::<f64>(mask, None, params)
}

/// Confidence after refinement: unchanged pixels keep theirs, newly labelled pixels take the
/// highest confidence among same-label 8-neighbours of the input, voided pixels get 0.
pub fn refined_confidence<T: Scalar>(
    before: &LabelMask,
    conf: &ConfidenceMap<T>,
    after: &LabelMask,
) -> ConfidenceMap<T> {
    let (w, h) = before.dims();
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let l = after.data()[i];
            let c = if l == VOID_ID {
                T::zero()
            } else if l == before.data()[i] {
                conf.data()[i]
            } else {
                let mut best = T::zero();
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (x, y) = (u as isize + dx, v as isize + dy);
                        if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
                            continue;
                        }
                        let j = y as usize * w + x as usize;
                        if before.data()[j] == l && conf.data()[j] > best {
                            best = conf.data()[j];
                        }
                    }
                }
                best
            };
            out.push(c);
        }
    }
    ConfidenceMap::new(w, h, out).expect("values copied from a valid map")
}
