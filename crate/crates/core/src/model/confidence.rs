use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-pixel reliability in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceMap<T: Scalar> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> ConfidenceMap<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width * height != data.len() {
            return Err(Error::LengthMismatch(format!(
                "confidence {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&c| !(c >= T::zero() && c <= T::one())) {
            return Err(Error::InvalidData(format!(
                "confidence {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(ConfidenceMap { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn ones(width: usize, height: usize) -> Self {
        ConfidenceMap { width, height, data: vec![T::one(); width * height] }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        ConfidenceMap { width, height, data: vec![T::zero(); width * height] }
    }

    /// Builds from values that are clamped into `[0, 1]`; NaN maps to 0.
    pub fn from_clamped(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|c| if c.is_nan() { T::zero() } else { c.max(T::zero()).min(T::one()) })
            .collect();
        Self::new(width, height, data)
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

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[v * self.width + u]
    }

    pub fn mean(&self) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        // accumulate in f64 so the mean is independent of the scalar width
        let s: f64 = self.data.iter().map(|c| c.to_f64_lossy()).sum();
        T::lit(s / self.data.len() as f64)
    }

    /// Bilinear sample at a real position, clamped to the raster edge.
    pub fn sample_bilinear(&self, x: T, y: T) -> T {
        crate::raster::bilinear(&self.data, self.width, self.height, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        assert!(ConfidenceMap::new(2, 1, vec![0.5f64, 1.5]).is_err());
        assert!(ConfidenceMap::new(1, 1, vec![f64::NAN]).is_err());
        assert!(ConfidenceMap::new(2, 1, vec![0.0f32, 1.0]).is_ok());
    }

    #[test]
    fn clamped_constructor() {
        let c = ConfidenceMap::from_clamped(3, 1, vec![-1.0f64, 2.0, f64::NAN]).unwrap();
        assert_eq!(c.data(), &[0.0, 1.0, 0.0]);
    }
}
