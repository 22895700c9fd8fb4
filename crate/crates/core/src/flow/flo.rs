//! Middlebury `.flo` files: magic float 202021.25, i32 width, i32 height, then row-major
//! interleaved `(fx, fy)` f32 values, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{FlowDirection, FlowField};

pub const FLO_MAGIC: f32 = 202021.25;

pub fn write_flo<T: Scalar, W: Write>(mut out: W, field: &FlowField<T>) -> std::io::Result<()> {
    let (w, h) = field.dims();
    let mut buf = Vec::with_capacity(12 + 8 * w * h);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(w as i32).to_le_bytes());
    buf.extend_from_slice(&(h as i32).to_le_bytes());
    for (x, y) in field.fx().iter().zip(field.fy()) {
        buf.extend_from_slice(&x.to_f32_lossy().to_le_bytes());
        buf.extend_from_slice(&y.to_f32_lossy().to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()
}

fn f32_at(bytes: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes"))
}

/// Parses a `.flo` payload; the file carries no frame indices, so the caller names them.
pub fn read_flo<R: Read>(mut input: R, direction: FlowDirection) -> Result<FlowField<f32>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<flo stream>", e))?;
    if bytes.len() < 12 {
        return Err(Error::Truncated { expected: 12, found: bytes.len() });
    }
    if bytes[0..4] != FLO_MAGIC.to_le_bytes() {
        return Err(Error::BadMagic("flo"));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let h = i32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if w <= 0 || h <= 0 {
        return Err(Error::InvalidData(format!("flo dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + 8 * w * h;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::InvalidData(format!(
            "{} trailing bytes after flo payload",
            bytes.len() - expected
        )));
    }
    let mut fx = Vec::with_capacity(w * h);
    let mut fy = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let x = f32_at(&bytes, 12 + 8 * i);
        let y = f32_at(&bytes, 16 + 8 * i);
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite(i));
        }
        fx.push(x);
        fy.push(y);
    }
    FlowField::new(w, h, fx, fy, direction)
}

pub fn save_flow<T: Scalar>(field: &FlowField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(i) = field
        .fx()
        .iter()
        .chain(field.fy())
        .position(|v| !v.to_f32_lossy().is_finite())
    {
        return Err(Error::NonFinite(i % (field.width() * field.height())));
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_flo(BufWriter::new(f), field).map_err(|e| Error::io(path, e))
}

pub fn load_flow(path: impl AsRef<Path>, direction: FlowDirection) -> Result<FlowField<f32>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_flo(BufReader::new(f), direction).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIR: FlowDirection = FlowDirection::new(0, 1);

    #[test]
    fn two_by_one_layout() {
        let field = FlowField::new(2, 1, vec![0.5f32, 2.0], vec![-1.0, 3.0], DIR).unwrap();
        let mut buf = Vec::new();
        write_flo(&mut buf, &field).unwrap();
        let mut expected = b"PIEH".to_vec();
        expected.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0]);
        for v in [0.5f32, -1.0, 2.0, 3.0] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(buf, expected);
        assert_eq!(buf.len(), 28);
    }

    #[test]
    fn magic_is_pieh() {
        assert_eq!(&FLO_MAGIC.to_le_bytes(), b"PIEH");
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut bad = b"XXXX".to_vec();
        bad.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(read_flo(&bad[..], DIR), Err(Error::BadMagic(_))));

        let field = FlowField::constant(3, 2, 1.0f32, 2.0, DIR);
        let mut buf = Vec::new();
        write_flo(&mut buf, &field).unwrap();
        assert!(matches!(read_flo(&buf[..buf.len() - 1], DIR), Err(Error::Truncated { .. })));

        let mut nan = buf.clone();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_flo(&nan[..], DIR), Err(Error::NonFinite(0))));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let field = FlowField::from_fn(5, 4, DIR, |u, v| {
            ((u as f32 * 0.1).sin() * 1e3, -(v as f32).powf(1.7) + f32::EPSILON)
        });
        let mut buf = Vec::new();
        write_flo(&mut buf, &field).unwrap();
        let back = read_flo(&buf[..], DIR).unwrap();
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.fx()), bits(field.fx()));
        assert_eq!(bits(back.fy()), bits(field.fy()));
    }
}
