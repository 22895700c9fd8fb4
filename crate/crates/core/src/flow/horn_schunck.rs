//! Coarse-to-fine Horn–Schunck with image warping.
//!
//! Each (level, warp) pair linearises the brightness constancy term around the current
//! flow and minimises the quadratic energy
//!
//! `E(u, v) = Σ_p (Ix·u + Iy·v + It')² + α² Σ_{p~q} ((u_p − u_q)² + (v_p − v_q)²)`
//!
//! over 4-neighbour edges with Gauss–Seidel sweeps. Every pixel update is the exact
//! minimiser of `E` over that pixel's `(u, v)` with its neighbours held fixed, so the
//! energy never increases from one sweep to the next.
//!
//! Between warps the flow is median filtered (5×5), which keeps motion boundaries sharp.

use crate::raster::{central_gradients, GrayImage};
use crate::scalar::Scalar;

use super::{pyramid, FlowParams};

const WARPS_PER_LEVEL: usize = 3;
/// Half-size of the median window applied to the flow after each warp.
const MEDIAN_RADIUS: usize = 2;

/// Windowed median with the window clipped at the borders; even counts take the lower middle.
pub(super) fn median_filter<T: Scalar>(f: &[T], width: usize, height: usize, radius: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len());
    let mut win = Vec::with_capacity((2 * radius + 1).pow(2));
    for y in 0..height {
        for x in 0..width {
            win.clear();
            for yy in y.saturating_sub(radius)..(y + radius + 1).min(height) {
                for xx in x.saturating_sub(radius)..(x + radius + 1).min(width) {
                    win.push(f[yy * width + xx]);
                }
            }
            win.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite flow"));
            out.push(win[(win.len() - 1) / 2]);
        }
    }
    out
}

/// Linearised data term for one solve: `Ix·u + Iy·v + It` should vanish.
pub(super) struct DataTerm<T: Scalar> {
    pub width: usize,
    pub height: usize,
    pub ix: Vec<T>,
    pub iy: Vec<T>,
    pub it: Vec<T>,
}

/// Energy of a flow under a linearised data term and smoothness weight `alpha`.
pub fn hs_energy<T: Scalar>(
    width: usize,
    height: usize,
    ix: &[T],
    iy: &[T],
    it: &[T],
    u: &[T],
    v: &[T],
    alpha: T,
) -> T {
    let a2 = alpha * alpha;
    let mut data = T::zero();
    let mut smooth = T::zero();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let r = ix[i] * u[i] + iy[i] * v[i] + it[i];
            data += r * r;
            if x + 1 < width {
                smooth += (u[i] - u[i + 1]).powi(2) + (v[i] - v[i + 1]).powi(2);
            }
            if y + 1 < height {
                smooth += (u[i] - u[i + width]).powi(2) + (v[i] - v[i + width]).powi(2);
            }
        }
    }
    data + a2 * smooth
}

/// Runs up to `sweeps` in-place Gauss–Seidel sweeps; returns the energy before and after each.
///
/// Stops early, keeping the previous iterate, once a sweep fails to lower the energy.
pub(super) fn solve<T: Scalar>(
    d: &DataTerm<T>,
    alpha: T,
    sweeps: usize,
    u: &mut [T],
    v: &mut [T],
) -> Vec<T> {
    let (w, h) = (d.width, d.height);
    let a2 = alpha * alpha;
    let mut trace = Vec::with_capacity(sweeps + 1);
    trace.push(hs_energy(w, h, &d.ix, &d.iy, &d.it, u, v, alpha));
    let (mut prev_u, mut prev_v) = (u.to_vec(), v.to_vec());
    for _ in 0..sweeps {
        prev_u.copy_from_slice(u);
        prev_v.copy_from_slice(v);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut su = T::zero();
                let mut sv = T::zero();
                let mut n = 0usize;
                if x > 0 {
                    su += u[i - 1];
                    sv += v[i - 1];
                    n += 1;
                }
                if x + 1 < w {
                    su += u[i + 1];
                    sv += v[i + 1];
                    n += 1;
                }
                if y > 0 {
                    su += u[i - w];
                    sv += v[i - w];
                    n += 1;
                }
                if y + 1 < h {
                    su += u[i + w];
                    sv += v[i + w];
                    n += 1;
                }
                if n == 0 {
                    continue;
                }
                let nn = T::count(n);
                let ubar = su / nn;
                let vbar = sv / nn;
                let lambda = a2 * nn;
                let (gx, gy) = (d.ix[i], d.iy[i]);
                let t = (gx * ubar + gy * vbar + d.it[i]) / (lambda + gx * gx + gy * gy);
                u[i] = ubar - gx * t;
                v[i] = vbar - gy * t;
            }
        }
        let e = hs_energy(w, h, &d.ix, &d.iy, &d.it, u, v, alpha);
        if e >= *trace.last().expect("seeded") {
            u.copy_from_slice(&prev_u);
            v.copy_from_slice(&prev_v);
            break;
        }
        trace.push(e);
    }
    trace
}

/// Linearises `b(p + w(p)) ≈ a(p)` around the current flow, in total-flow form.
pub(super) fn linearise<T: Scalar>(
    a: &[T],
    b: &[T],
    width: usize,
    height: usize,
    u: &[T],
    v: &[T],
) -> DataTerm<T> {
    let (bw, inside) = pyramid::warp(b, width, height, u, v);
    let (ax, ay) = central_gradients(a, width, height);
    let (bx, by) = central_gradients(&bw, width, height);
    let half = T::lit(0.5);
    let n = width * height;
    let mut ix = vec![T::zero(); n];
    let mut iy = vec![T::zero(); n];
    let mut it = vec![T::zero(); n];
    for i in 0..n {
        if !inside[i] {
            continue;
        }
        ix[i] = (ax[i] + bx[i]) * half;
        iy[i] = (ay[i] + by[i]) * half;
        // data residual in terms of the total flow: Ix·(u − u0) + Iy·(v − v0) + (b_w − a)
        it[i] = bw[i] - a[i] - ix[i] * u[i] - iy[i] * v[i];
    }
    DataTerm { width, height, ix, iy, it }
}

pub(super) fn estimate<T: Scalar>(
    a: &GrayImage<T>,
    b: &GrayImage<T>,
    params: &FlowParams,
) -> (Vec<T>, Vec<T>, Vec<Vec<T>>) {
    let pa = pyramid::build(a, params.pyramid_levels, params.pyramid_scale);
    let pb = pyramid::build(b, params.pyramid_levels, params.pyramid_scale);
    let alpha = T::lit(params.smoothness_alpha);
    let mut traces = Vec::new();
    let coarsest = pa.len() - 1;
    let mut u = vec![T::zero(); pa[coarsest].width * pa[coarsest].height];
    let mut v = u.clone();
    let mut dims = (pa[coarsest].width, pa[coarsest].height);
    for lvl in (0..pa.len()).rev() {
        let (la, lb) = (&pa[lvl], &pb[lvl]);
        if (la.width, la.height) != dims {
            let (nu, nv) = pyramid::upsample_flow(&u, &v, dims, (la.width, la.height));
            u = nu;
            v = nv;
            dims = (la.width, la.height);
        }
        for _ in 0..WARPS_PER_LEVEL {
            let d = linearise(&la.data, &lb.data, la.width, la.height, &u, &v);
            traces.push(solve(&d, alpha, params.iterations, &mut u, &mut v));
            u = median_filter(&u, la.width, la.height, MEDIAN_RADIUS);
            v = median_filter(&v, la.width, la.height, MEDIAN_RADIUS);
        }
    }
    (u, v, traces)
}
