use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Magic bytes opening a probability-map file.
pub const PRB_MAGIC: &[u8; 4] = b"PRB1";
/// Allowed deviation of a per-pixel probability sum from 1.
pub const NORMALISATION_TOL: f64 = 1e-4;

/// Per-pixel class probabilities, stored as `classes` planar row-major planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap<T: Scalar> {
    width: usize,
    height: usize,
    classes: usize,
    planes: Vec<T>,
}

impl<T: Scalar> ProbMap<T> {
    pub fn new(width: usize, height: usize, classes: usize, planes: Vec<T>) -> Result<Self> {
        if classes == 0 || classes > 255 {
            return Err(Error::InvalidData(format!("class count {classes} outside 1..=255")));
        }
        let n = width * height;
        if planes.len() != n * classes {
            return Err(Error::LengthMismatch(format!(
                "prob map {width}x{height}x{classes} needs {} values, got {}",
                n * classes,
                planes.len()
            )));
        }
        if let Some(i) = planes.iter().position(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::InvalidData(format!("probability {i} is negative or non-finite")));
        }
        for i in 0..n {
            let sum: f64 = (0..classes).map(|c| planes[c * n + i].to_f64_lossy()).sum();
            if (sum - 1.0).abs() > NORMALISATION_TOL {
                return Err(Error::InvalidData(format!(
                    "pixel ({}, {}) probabilities sum to {sum}",
                    i % width.max(1),
                    i / width.max(1)
                )));
            }
        }
        Ok(ProbMap { width, height, classes, planes })
    }

    /// Every pixel certain of `class`.
    pub fn one_hot(width: usize, height: usize, classes: usize, class: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::InvalidData(format!("class {class} >= {classes}")));
        }
        let n = width * height;
        let mut planes = vec![T::zero(); n * classes];
        planes[class * n..(class + 1) * n].fill(T::one());
        Self::new(width, height, classes, planes)
    }

    pub fn uniform(width: usize, height: usize, classes: usize) -> Result<Self> {
        let p = T::one() / T::count(classes);
        Self::new(width, height, classes, vec![p; width * height * classes])
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

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn planes(&self) -> &[T] {
        &self.planes
    }

    pub fn prob(&self, class: usize, u: usize, v: usize) -> T {
        self.planes[class * self.width * self.height + v * self.width + u]
    }

    /// `(argmax class, max probability)` at pixel index `i`; ties go to the lower class.
    pub fn argmax(&self, i: usize) -> (usize, T) {
        let n = self.width * self.height;
        let mut best = (0, self.planes[i]);
        for c in 1..self.classes {
            let p = self.planes[c * n + i];
            if p > best.1 {
                best = (c, p);
            }
        }
        best
    }

    pub fn cast<U: Scalar>(&self) -> Result<ProbMap<U>> {
        let planes = self
            .planes
            .iter()
            .map(|p| U::from(*p).ok_or(Error::NonFinite(0)))
            .collect::<Result<Vec<_>>>()?;
        ProbMap::new(self.width, self.height, self.classes, planes)
    }
}

pub fn write_prob<T: Scalar, W: Write>(p: &ProbMap<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(PRB_MAGIC)?;
    for d in [p.height, p.width, p.classes] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(p.planes.len() * 4);
    for v in &p.planes {
        buf.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_prob<R: Read>(mut r: R) -> Result<ProbMap<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::InvalidData(format!("reading prob map: {e}")))?;
    if bytes.len() < 16 {
        return Err(Error::Truncated { expected: 16, found: bytes.len() });
    }
    if &bytes[..4] != PRB_MAGIC {
        return Err(Error::BadMagic("prob map"));
    }
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (height, width, classes) = (dim(4), dim(8), dim(12));
    let expected = 16 + height * width * classes * 4;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::InvalidData(format!("{} trailing bytes in prob map", bytes.len() - expected)));
    }
    let planes: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(i) = planes.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    ProbMap::new(width, height, classes, planes)
}

pub fn save_prob<T: Scalar>(p: &ProbMap<T>, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_prob(p, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_prob(path: &Path) -> Result<ProbMap<f32>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_prob(std::io::BufReader::new(f))
}
