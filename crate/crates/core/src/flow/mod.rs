//! Dense displacement fields: estimation, composition, consistency checking and file I/O.

mod compose;
mod consistency;
mod flo;
mod horn_schunck;
mod lucas_kanade;
mod pyramid;

pub use compose::{compose_flows, ComposedFlow};
pub use consistency::{forward_backward_confidence, Consistency, ConsistencyParams};
pub use flo::{load_flow, read_flo, save_flow, write_flo, FLO_MAGIC};
pub use horn_schunck::hs_energy;

use crate::error::{Error, Result};
use crate::raster::{bilinear, GrayImage};
use crate::scalar::Scalar;

/// Ordered frame pair a field maps between: pixel `q` of `source` moves to `q + F(q)` in `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowDirection {
    pub source: u32,
    pub target: u32,
}

impl FlowDirection {
    pub const fn new(source: u32, target: u32) -> Self {
        FlowDirection { source, target }
    }

    pub const fn reversed(self) -> Self {
        FlowDirection { source: self.target, target: self.source }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowField<T: Scalar> {
    width: usize,
    height: usize,
    fx: Vec<T>,
    fy: Vec<T>,
    direction: FlowDirection,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(
        width: usize,
        height: usize,
        fx: Vec<T>,
        fy: Vec<T>,
        direction: FlowDirection,
    ) -> Result<Self> {
        let n = width * height;
        if fx.len() != n || fy.len() != n {
            return Err(Error::LengthMismatch(format!(
                "flow {width}x{height} needs {n} values per component, got {}/{}",
                fx.len(),
                fy.len()
            )));
        }
        if let Some(i) = fx.iter().zip(&fy).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(FlowField { width, height, fx, fy, direction })
    }

    pub fn zeros(width: usize, height: usize, direction: FlowDirection) -> Self {
        let n = width * height;
        FlowField { width, height, fx: vec![T::zero(); n], fy: vec![T::zero(); n], direction }
    }

    pub fn constant(width: usize, height: usize, dx: T, dy: T, direction: FlowDirection) -> Self {
        let n = width * height;
        FlowField { width, height, fx: vec![dx; n], fy: vec![dy; n], direction }
    }

    /// Builds a field from a function of pixel `(u, v)`; panics on non-finite output.
    pub fn from_fn(
        width: usize,
        height: usize,
        direction: FlowDirection,
        mut f: impl FnMut(usize, usize) -> (T, T),
    ) -> Self {
        let mut fx = Vec::with_capacity(width * height);
        let mut fy = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                let (a, b) = f(u, v);
                assert!(a.is_finite() && b.is_finite(), "non-finite flow at ({u},{v})");
                fx.push(a);
                fy.push(b);
            }
        }
        FlowField { width, height, fx, fy, direction }
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

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn with_direction(mut self, direction: FlowDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn fx(&self) -> &[T] {
        &self.fx
    }

    pub fn fy(&self) -> &[T] {
        &self.fy
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> (T, T) {
        let i = v * self.width + u;
        (self.fx[i], self.fy[i])
    }

    /// Bilinear sample at a real position, clamped to the field edge.
    #[inline]
    pub fn sample(&self, x: T, y: T) -> (T, T) {
        (
            bilinear(&self.fx, self.width, self.height, x, y),
            bilinear(&self.fy, self.width, self.height, x, y),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.fx.iter().chain(&self.fy).all(|&v| v == T::zero())
    }

    pub fn cast<U: Scalar>(&self) -> Result<FlowField<U>> {
        let conv = |v: &T| U::lit(v.to_f64_lossy());
        FlowField::new(
            self.width,
            self.height,
            self.fx.iter().map(conv).collect(),
            self.fy.iter().map(conv).collect(),
            self.direction,
        )
    }

    /// Per-pixel endpoint error against a reference field, restricted to pixels at least
    /// `margin` away from every border.
    pub fn endpoint_errors(&self, reference: &FlowField<T>, margin: usize) -> Vec<T> {
        let mut out = Vec::new();
        for v in margin..self.height.saturating_sub(margin) {
            for u in margin..self.width.saturating_sub(margin) {
                let (a, b) = self.get(u, v);
                let (c, d) = reference.get(u, v);
                out.push(((a - c).powi(2) + (b - d).powi(2)).sqrt());
            }
        }
        out
    }

    pub(crate) fn check_dims(&self, other: (usize, usize), what: &'static str) -> Result<()> {
        if self.dims() != other {
            return Err(Error::dims(what, self.dims(), other));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMethod {
    #[default]
    HornSchunck,
    PyramidalLk,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub method: FlowMethod,
    /// Horn–Schunck smoothness weight (intensities on the 0–255 scale).
    pub smoothness_alpha: f64,
    /// Gauss–Seidel sweeps per warp (Horn–Schunck) or max Newton steps per pixel (LK).
    pub iterations: usize,
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    /// Lucas–Kanade window radius in pixels.
    pub window: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            method: FlowMethod::HornSchunck,
            smoothness_alpha: 15.0,
            iterations: 200,
            pyramid_levels: 4,
            pyramid_scale: 0.5,
            window: 7,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidParam { name, reason: reason.into() });
        if self.iterations < 1 {
            return bad("iterations", "must be >= 1");
        }
        if self.pyramid_levels < 1 {
            return bad("pyramid_levels", "must be >= 1");
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad("pyramid_scale", "must lie in (0, 1)");
        }
        if !(self.smoothness_alpha > 0.0 && self.smoothness_alpha.is_finite()) {
            return bad("smoothness_alpha", "must be positive");
        }
        Ok(())
    }
}

/// Result of [`estimate_flow`].
#[derive(Clone, Debug)]
pub struct FlowEstimate<T: Scalar> {
    pub field: FlowField<T>,
    /// Set when neither image carries any gradient; the field is then all zero.
    pub under_constrained: bool,
    /// Horn–Schunck energy before and after every sweep, one entry per (level, warp)
    /// solve from coarsest to finest. Empty for Lucas–Kanade.
    pub energy_trace: Vec<Vec<T>>,
}

/// Minimum image side accepted by the estimators.
pub const MIN_IMAGE_SIDE: usize = 8;

/// Estimates the dense flow mapping `a` onto `b`, labelled with `direction`.
pub fn estimate_flow<T: Scalar>(
    a: &GrayImage<T>,
    b: &GrayImage<T>,
    direction: FlowDirection,
    params: &FlowParams,
) -> Result<FlowEstimate<T>> {
    params.validate()?;
    if a.dims() != b.dims() {
        return Err(Error::dims("image pair", a.dims(), b.dims()));
    }
    let (w, h) = a.dims();
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(Error::InvalidData(format!(
            "images must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, got {w}x{h}"
        )));
    }
    if a.max_gradient() == T::zero() && b.max_gradient() == T::zero() {
        return Ok(FlowEstimate {
            field: FlowField::zeros(w, h, direction),
            under_constrained: true,
            energy_trace: Vec::new(),
        });
    }
    let (fx, fy, energy_trace) = match params.method {
        FlowMethod::HornSchunck => horn_schunck::estimate(a, b, params),
        FlowMethod::PyramidalLk => {
            let (fx, fy) = lucas_kanade::estimate(a, b, params);
            (fx, fy, Vec::new())
        }
    };
    // normalise -0.0 so identical inputs serialise identically
    let clean = |v: Vec<T>| v.into_iter().map(|x| x + T::zero()).collect::<Vec<_>>();
    let field = FlowField::new(w, h, clean(fx), clean(fy), direction)?;
    Ok(FlowEstimate { field, under_constrained: false, energy_trace })
}
