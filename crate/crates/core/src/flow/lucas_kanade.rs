// Dense pyramidal Lucas–Kanade: every pixel is tracked independently with a square
// window, refined coarse to fine.

use crate::raster::{bilinear, central_gradients, GrayImage};
use crate::scalar::Scalar;

use super::{pyramid, FlowParams};

const MAX_NEWTON_STEPS: usize = 20;
const STEP_EPS: f64 = 1e-3;
const MIN_EIGEN: f64 = 1e-6;

pub(super) fn estimate<T: Scalar>(
    a: &GrayImage<T>,
    b: &GrayImage<T>,
    params: &FlowParams,
) -> (Vec<T>, Vec<T>) {
    let pa = pyramid::build(a, params.pyramid_levels, params.pyramid_scale);
    let pb = pyramid::build(b, params.pyramid_levels, params.pyramid_scale);
    let coarsest = pa.len() - 1;
    let mut dims = (pa[coarsest].width, pa[coarsest].height);
    let mut u = vec![T::zero(); dims.0 * dims.1];
    let mut v = u.clone();
    let steps = params.iterations.min(MAX_NEWTON_STEPS);
    let r = params.window as i64;
    for lvl in (0..pa.len()).rev() {
        let (la, lb) = (&pa[lvl], &pb[lvl]);
        let (w, h) = (la.width, la.height);
        if (w, h) != dims {
            let (nu, nv) = pyramid::upsample_flow(&u, &v, dims, (w, h));
            u = nu;
            v = nv;
            dims = (w, h);
        }
        let (gx, gy) = central_gradients(&la.data, w, h);
        for py in 0..h as i64 {
            for px in 0..w as i64 {
                let i = py as usize * w + px as usize;
                let (x0, x1) = ((px - r).max(0), (px + r).min(w as i64 - 1));
                let (y0, y1) = ((py - r).max(0), (py + r).min(h as i64 - 1));
                let (mut gxx, mut gxy, mut gyy) = (T::zero(), T::zero(), T::zero());
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let j = y as usize * w + x as usize;
                        gxx += gx[j] * gx[j];
                        gxy += gx[j] * gy[j];
                        gyy += gy[j] * gy[j];
                    }
                }
                let det = gxx * gyy - gxy * gxy;
                let tr = gxx + gyy;
                let disc = ((gxx - gyy).powi(2) + T::lit(4.0) * gxy * gxy).sqrt();
                let min_eig = (tr - disc) * T::lit(0.5);
                let count = T::count(((x1 - x0 + 1) * (y1 - y0 + 1)) as usize);
                if min_eig / count < T::lit(MIN_EIGEN) || det == T::zero() {
                    continue;
                }
                let (mut du, mut dv) = (u[i], v[i]);
                for _ in 0..steps {
                    let (mut bx, mut by) = (T::zero(), T::zero());
                    for y in y0..=y1 {
                        for x in x0..=x1 {
                            let j = y as usize * w + x as usize;
                            let sx = T::count(x as usize) + du;
                            let sy = T::count(y as usize) + dv;
                            let diff = la.data[j] - bilinear(&lb.data, w, h, sx, sy);
                            bx += gx[j] * diff;
                            by += gy[j] * diff;
                        }
                    }
                    let su = (gyy * bx - gxy * by) / det;
                    let sv = (gxx * by - gxy * bx) / det;
                    du += su;
                    dv += sv;
                    if (su * su + sv * sv).sqrt() < T::lit(STEP_EPS) {
                        break;
                    }
                }
                if du.is_finite() && dv.is_finite() {
                    u[i] = du;
                    v[i] = dv;
                }
            }
        }
    }
    (u, v)
}
