//! Forward–backward consistency: pixel `q` of frame `a` maps to `q' = q + F_ab(q)`; a
//! reliable pair returns there, i.e. `F_ab(q) + F_ba(q') ≈ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConfidenceMap;
use crate::raster::in_bounds;
use crate::scalar::Scalar;

use super::FlowField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsistencyParams {
    /// Tolerance relative to the squared flow magnitudes.
    pub alpha: f64,
    /// Absolute tolerance in px².
    pub beta: f64,
    /// Soft-confidence scale in px.
    pub sigma: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams { alpha: 0.01, beta: 0.5, sigma: 1.0 }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParam { name: "alpha", reason: "must be >= 0".into() });
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParam { name: "beta", reason: "must be >= 0".into() });
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParam { name: "sigma", reason: "must be > 0".into() });
        }
        Ok(())
    }
}

/// Output of [`forward_backward_confidence`], indexed by pixels of the forward source frame.
#[derive(Clone, Debug)]
pub struct Consistency<T: Scalar> {
    /// `exp(−d²/σ²)`, zero where the forward mapping leaves the image.
    pub confidence: ConfidenceMap<T>,
    /// Hard test `d² ≤ α(|F_ab|² + |F_ba(q')|²) + β`, false out of bounds.
    pub valid: Vec<bool>,
    pub in_bounds: Vec<bool>,
    /// Round-trip discrepancy `d`; meaningful only where `in_bounds`.
    pub discrepancy: Vec<T>,
}

impl<T: Scalar> Consistency<T> {
    pub fn valid_fraction(&self) -> f64 {
        if self.valid.is_empty() {
            return 0.0;
        }
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }

    pub fn in_bounds_fraction(&self) -> f64 {
        if self.in_bounds.is_empty() {
            return 0.0;
        }
        self.in_bounds.iter().filter(|&&v| v).count() as f64 / self.in_bounds.len() as f64
    }

    /// In-bounds discrepancies, ascending.
    pub fn sorted_discrepancies(&self) -> Vec<T> {
        let mut d: Vec<T> = self
            .discrepancy
            .iter()
            .zip(&self.in_bounds)
            .filter(|(_, &ib)| ib)
            .map(|(&d, _)| d)
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        d
    }
}

pub fn forward_backward_confidence<T: Scalar>(
    forward: &FlowField<T>,
    backward: &FlowField<T>,
    params: &ConsistencyParams,
) -> Result<Consistency<T>> {
    params.validate()?;
    backward.check_dims(forward.dims(), "forward/backward flow")?;
    if forward.direction().reversed() != backward.direction() {
        return Err(Error::Direction(format!(
            "{:?} and {:?} are not mutual inverses",
            forward.direction(),
            backward.direction()
        )));
    }
    let (w, h) = forward.dims();
    let alpha = T::lit(params.alpha);
    let beta = T::lit(params.beta);
    let inv_s2 = T::one() / T::lit(params.sigma * params.sigma);
    let n = w * h;
    let mut conf = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    let mut inside = Vec::with_capacity(n);
    let mut disc = Vec::with_capacity(n);
    for v in 0..h {
        for u in 0..w {
            let (fx, fy) = forward.get(u, v);
            let x = T::count(u) + fx;
            let y = T::count(v) + fy;
            if !in_bounds(w, h, x, y) {
                conf.push(T::zero());
                valid.push(false);
                inside.push(false);
                disc.push(T::zero());
                continue;
            }
            let (bx, by) = backward.sample(x, y);
            let dx = fx + bx;
            let dy = fy + by;
            let d2 = dx * dx + dy * dy;
            let tol = alpha * (fx * fx + fy * fy + bx * bx + by * by) + beta;
            conf.push((-d2 * inv_s2).exp());
            valid.push(d2 <= tol);
            inside.push(true);
            disc.push(d2.sqrt());
        }
    }
    Ok(Consistency {
        confidence: ConfidenceMap::from_clamped(w, h, conf)?,
        valid,
        in_bounds: inside,
        discrepancy: disc,
    })
}
