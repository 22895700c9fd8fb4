//! Grayscale rasters and the sampling/resampling primitives the flow solvers share.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Luma weights applied to 8-bit RGB before flow estimation.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Single-channel image with intensities on the 0–255 scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T: Scalar> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::LengthMismatch(format!(
                "image {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let [wr, wg, wb] = LUMA_WEIGHTS.map(T::lit);
        let data = img
            .pixels()
            .map(|p| {
                wr * T::lit(p[0] as f64) + wg * T::lit(p[1] as f64) + wb * T::lit(p[2] as f64)
            })
            .collect();
        GrayImage { width: w as usize, height: h as usize, data }
    }

    pub fn from_luma8(img: &image::GrayImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| T::lit(p[0] as f64)).collect();
        GrayImage { width: w as usize, height: h as usize, data }
    }

    /// Converts any decoded image to luma with the fixed weights.
    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        match img {
            image::DynamicImage::ImageLuma8(g) => Self::from_luma8(g),
            other => Self::from_rgb8(&other.to_rgb8()),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[v * self.width + u]
    }

    pub fn sample_bilinear(&self, x: T, y: T) -> T {
        bilinear(&self.data, self.width, self.height, x, y)
    }

    /// Largest absolute central-difference gradient component.
    pub fn max_gradient(&self) -> T {
        let (gx, gy) = central_gradients(&self.data, self.width, self.height);
        gx.iter().chain(gy.iter()).fold(T::zero(), |m, g| m.max(g.abs()))
    }
}

/// Bilinear interpolation with clamp-to-edge addressing.
#[inline]
pub fn bilinear<T: Scalar>(data: &[T], width: usize, height: usize, x: T, y: T) -> T {
    let max_x = T::count(width - 1);
    let max_y = T::count(height - 1);
    let x = x.max(T::zero()).min(max_x);
    let y = y.max(T::zero()).min(max_y);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0.to_usize().unwrap_or(0);
    let y0 = y0.to_usize().unwrap_or(0);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let a = data[y0 * width + x0];
    let b = data[y0 * width + x1];
    let c = data[y1 * width + x0];
    let d = data[y1 * width + x1];
    let one = T::one();
    (one - fy) * ((one - fx) * a + fx * b) + fy * ((one - fx) * c + fx * d)
}

/// True when `(x, y)` lies inside `[0, w-1] x [0, h-1]`.
#[inline]
pub fn in_bounds<T: Scalar>(width: usize, height: usize, x: T, y: T) -> bool {
    x >= T::zero()
        && y >= T::zero()
        && x <= T::count(width - 1)
        && y <= T::count(height - 1)
}

/// Central differences, one-sided at the borders.
pub fn central_gradients<T: Scalar>(data: &[T], width: usize, height: usize) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    let mut gx = vec![T::zero(); data.len()];
    let mut gy = vec![T::zero(); data.len()];
    for v in 0..height {
        for u in 0..width {
            let i = v * width + u;
            gx[i] = if width < 2 {
                T::zero()
            } else if u == 0 {
                data[i + 1] - data[i]
            } else if u == width - 1 {
                data[i] - data[i - 1]
            } else {
                (data[i + 1] - data[i - 1]) * half
            };
            gy[i] = if height < 2 {
                T::zero()
            } else if v == 0 {
                data[i + width] - data[i]
            } else if v == height - 1 {
                data[i] - data[i - width]
            } else {
                (data[i + width] - data[i - width]) * half
            };
        }
    }
    (gx, gy)
}

fn gaussian_kernel<T: Scalar>(sigma: f64) -> Vec<T> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|k| T::lit(k / s)).collect()
}

/// Separable Gaussian blur with clamped borders.
pub fn gaussian_blur<T: Scalar>(data: &[T], width: usize, height: usize, sigma: f64) -> Vec<T> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let k = gaussian_kernel::<T>(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![T::zero(); data.len()];
    for v in 0..height {
        for u in 0..width {
            let mut acc = T::zero();
            for (j, &w) in k.iter().enumerate() {
                let uu = (u as i64 + j as i64 - r).clamp(0, width as i64 - 1) as usize;
                acc += w * data[v * width + uu];
            }
            tmp[v * width + u] = acc;
        }
    }
    let mut out = vec![T::zero(); data.len()];
    for v in 0..height {
        for u in 0..width {
            let mut acc = T::zero();
            for (j, &w) in k.iter().enumerate() {
                let vv = (v as i64 + j as i64 - r).clamp(0, height as i64 - 1) as usize;
                acc += w * tmp[vv * width + u];
            }
            out[v * width + u] = acc;
        }
    }
    out
}

/// Pixel-center aligned bilinear resize.
pub fn resize_bilinear<T: Scalar>(
    data: &[T],
    width: usize,
    height: usize,
    new_width: usize,
    new_height: usize,
) -> Vec<T> {
    if new_width == width && new_height == height {
        return data.to_vec();
    }
    let sx = T::count(width) / T::count(new_width);
    let sy = T::count(height) / T::count(new_height);
    let half = T::lit(0.5);
    let mut out = Vec::with_capacity(new_width * new_height);
    for v in 0..new_height {
        let y = (T::count(v) + half) * sy - half;
        for u in 0..new_width {
            let x = (T::count(u) + half) * sx - half;
            out.push(bilinear(data, width, height, x, y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_exact_on_grid_and_affine() {
        let w = 5;
        let h = 4;
        let data: Vec<f64> = (0..w * h).map(|i| (2 * (i % w) + 3 * (i / w)) as f64).collect();
        assert_eq!(bilinear(&data, w, h, 2.0, 1.0), 7.0);
        assert!((bilinear(&data, w, h, 2.25, 1.5) - (4.5 + 4.5)).abs() < 1e-12);
        // clamp to edge
        assert_eq!(bilinear(&data, w, h, -3.0, 0.0), 0.0);
    }

    #[test]
    fn luma_weights_applied() {
        let mut img = image::RgbImage::new(1, 1);
        img.put_pixel(0, 0, image::Rgb([100, 50, 200]));
        let g = GrayImage::<f64>::from_rgb8(&img);
        assert!((g.get(0, 0) - (29.9 + 29.35 + 22.8)).abs() < 1e-9);
    }

    #[test]
    fn blur_preserves_constant() {
        let d = vec![7.0f64; 30];
        let b = gaussian_blur(&d, 6, 5, 1.0);
        assert!(b.iter().all(|&v| (v - 7.0).abs() < 1e-12));
    }
}
