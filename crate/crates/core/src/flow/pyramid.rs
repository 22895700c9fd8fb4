use crate::raster::{bilinear, gaussian_blur, in_bounds, resize_bilinear, GrayImage};
use crate::scalar::Scalar;

use super::MIN_IMAGE_SIDE;

/// One pyramid level: raw intensities plus dimensions.
pub(super) struct Level<T: Scalar> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

/// Finest-first image pyramid; stops early rather than shrinking below the minimum side.
pub(super) fn build<T: Scalar>(img: &GrayImage<T>, levels: usize, scale: f64) -> Vec<Level<T>> {
    let mut out = vec![Level { width: img.width(), height: img.height(), data: img.data().to_vec() }];
    let sigma = 0.5 / scale;
    while out.len() < levels {
        let prev = out.last().expect("non-empty");
        let nw = (prev.width as f64 * scale).round() as usize;
        let nh = (prev.height as f64 * scale).round() as usize;
        if nw < MIN_IMAGE_SIDE || nh < MIN_IMAGE_SIDE {
            break;
        }
        let blurred = gaussian_blur(&prev.data, prev.width, prev.height, sigma);
        let data = resize_bilinear(&blurred, prev.width, prev.height, nw, nh);
        out.push(Level { width: nw, height: nh, data });
    }
    out
}

/// Resizes a flow component pair to a new grid and rescales the displacements.
pub(super) fn upsample_flow<T: Scalar>(
    fx: &[T],
    fy: &[T],
    from: (usize, usize),
    to: (usize, usize),
) -> (Vec<T>, Vec<T>) {
    let sx = T::count(to.0) / T::count(from.0);
    let sy = T::count(to.1) / T::count(from.1);
    let ux = resize_bilinear(fx, from.0, from.1, to.0, to.1).into_iter().map(|v| v * sx).collect();
    let uy = resize_bilinear(fy, from.0, from.1, to.0, to.1).into_iter().map(|v| v * sy).collect();
    (ux, uy)
}

/// Samples `img` at `p + flow(p)`; the mask marks samples that landed inside the raster.
pub(super) fn warp<T: Scalar>(
    img: &[T],
    width: usize,
    height: usize,
    fx: &[T],
    fy: &[T],
) -> (Vec<T>, Vec<bool>) {
    let mut out = Vec::with_capacity(img.len());
    let mut inside = Vec::with_capacity(img.len());
    for v in 0..height {
        for u in 0..width {
            let i = v * width + u;
            let x = T::count(u) + fx[i];
            let y = T::count(v) + fy[i];
            inside.push(in_bounds(width, height, x, y));
            out.push(bilinear(img, width, height, x, y));
        }
    }
    (out, inside)
}
