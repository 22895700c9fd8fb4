use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ConfidenceMap, LabelMask, MaskKind};
use crate::raster::GrayImage;
use crate::scalar::Scalar;

/// Magic bytes opening a confidence raster file.
pub const CONF_MAGIC: &[u8; 4] = b"CNF1";

pub fn read_mask_png(path: &Path, kind: &MaskKind) -> Result<LabelMask> {
    let img = image::open(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    let image::DynamicImage::ImageLuma8(g) = img else {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            message: format!("mask must be 8-bit single-channel, found {:?}", img.color()),
        });
    };
    let (w, h) = (g.width() as usize, g.height() as usize);
    LabelMask::new(w, h, g.into_raw(), kind.clone())
        .map_err(|e| Error::Dataset { path: path.to_path_buf(), message: e.to_string() })
}

pub fn write_mask_png(mask: &LabelMask, path: &Path) -> Result<()> {
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, mask.data().to_vec())
        .expect("buffer sized by mask");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.to_path_buf(), source: e })
}

pub fn read_frame<T: Scalar>(path: &Path) -> Result<GrayImage<T>> {
    let img = image::open(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    Ok(GrayImage::from_dynamic(&img))
}

pub fn read_rgb(path: &Path) -> Result<image::RgbImage> {
    let img = image::open(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    Ok(img.to_rgb8())
}

pub fn write_png(img: &image::RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.to_path_buf(), source: e })
}

/// `CNF1`, u32 LE height and width, then row-major f32 LE values.
pub fn write_confidence<T: Scalar, W: Write>(c: &ConfidenceMap<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(CONF_MAGIC)?;
    w.write_all(&(c.height() as u32).to_le_bytes())?;
    w.write_all(&(c.width() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(c.data().len() * 4);
    for v in c.data() {
        buf.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_confidence<R: Read>(mut r: R) -> Result<ConfidenceMap<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::InvalidData(format!("reading confidence: {e}")))?;
    if bytes.len() < 12 {
        return Err(Error::Truncated { expected: 12, found: bytes.len() });
    }
    if &bytes[..4] != CONF_MAGIC {
        return Err(Error::BadMagic("confidence raster"));
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let expected = 12 + w * h * 4;
    if bytes.len() != expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    ConfidenceMap::new(w, h, data)
}

pub fn save_confidence<T: Scalar>(c: &ConfidenceMap<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_confidence(c, &mut buf).expect("in-memory write");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_confidence(path: &Path) -> Result<ConfidenceMap<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_confidence(&bytes[..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VOID_ID;

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let m = LabelMask::semantic(5, 3, (0..15).map(|i| if i == 7 { VOID_ID } else { i as u8 }).collect()).unwrap();
        write_mask_png(&m, &p).unwrap();
        assert_eq!(read_mask_png(&p, &MaskKind::Semantic).unwrap(), m);
    }

    #[test]
    fn colour_mask_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        write_png(&image::RgbImage::new(2, 2), &p).unwrap();
        assert!(matches!(read_mask_png(&p, &MaskKind::Semantic), Err(Error::Dataset { .. })));
    }

    #[test]
    fn confidence_round_trip_is_bit_exact() {
        let c = ConfidenceMap::new(3, 2, vec![0.0f32, 1.0, 0.1, 0.333_333_34, 1e-30, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_confidence(&c, &mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 24);
        assert_eq!(read_confidence(&buf[..]).unwrap(), c);
        assert!(matches!(read_confidence(&b"XXXX\0\0\0\0\0\0\0\0"[..]), Err(Error::BadMagic(_))));
    }
}
