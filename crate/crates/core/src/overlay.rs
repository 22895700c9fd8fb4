//! Three-panel visualisation: RGB frame, colourised mask, and the two blended at alpha 0.5.

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::model::{LabelMask, VOID_ID};

/// Colour of label id `i` is `PALETTE[i % 16]`; id 0 (background) is black.
pub const PALETTE: [[u8; 3]; 16] = [
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [128, 0, 0],
    [128, 128, 128],
];

/// Mask-panel colour of void pixels; void is never blended into the overlay.
pub const VOID_COLOR: [u8; 3] = [255, 255, 255];

pub fn label_color(id: u8) -> [u8; 3] {
    if id == VOID_ID {
        VOID_COLOR
    } else {
        PALETTE[id as usize % PALETTE.len()]
    }
}

/// Alpha 0.5 blend with halves rounded up: `(a + b + 1) / 2`.
pub fn blend(a: u8, b: u8) -> u8 {
    ((a as u16 + b as u16 + 1) / 2) as u8
}

pub fn colorize(mask: &LabelMask) -> RgbImage {
    let (w, h) = mask.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| Rgb(label_color(mask.get(x as usize, y as usize))))
}

pub fn blend_overlay(rgb: &RgbImage, mask: &LabelMask) -> Result<RgbImage> {
    check(rgb, mask)?;
    Ok(RgbImage::from_fn(rgb.width(), rgb.height(), |x, y| {
        let px = rgb.get_pixel(x, y).0;
        let id = mask.get(x as usize, y as usize);
        if id == VOID_ID {
            return Rgb(px);
        }
        let c = label_color(id);
        Rgb([blend(px[0], c[0]), blend(px[1], c[1]), blend(px[2], c[2])])
    }))
}

fn check(rgb: &RgbImage, mask: &LabelMask) -> Result<()> {
    let d = (rgb.width() as usize, rgb.height() as usize);
    if d != mask.dims() {
        return Err(Error::dims("frame vs mask", d, mask.dims()));
    }
    Ok(())
}

/// `[rgb | colourised mask | overlay]`, three frame widths wide.
pub fn overlay_panels(rgb: &RgbImage, mask: &LabelMask) -> Result<RgbImage> {
    check(rgb, mask)?;
    let (w, h) = (rgb.width(), rgb.height());
    let panels = [rgb.clone(), colorize(mask), blend_overlay(rgb, mask)?];
    let mut out = RgbImage::new(3 * w, h);
    for (i, p) in panels.iter().enumerate() {
        image::imageops::replace(&mut out, p, i as i64 * w as i64, 0);
    }
    Ok(out)
}
