use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::LabelMask;

/// Axis-aligned box in pixel coordinates, `min < max` on both axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox { x_min, y_min, x_max, y_max };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::InvalidData(format!("degenerate box {self:?}")));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    /// Box clipped to `[0, width] x [0, height]`; `None` if nothing remains.
    pub fn clamped(&self, width: f64, height: f64) -> Option<BBox> {
        let b = BBox {
            x_min: self.x_min.clamp(0.0, width),
            y_min: self.y_min.clamp(0.0, height),
            x_max: self.x_max.clamp(0.0, width),
            y_max: self.y_max.clamp(0.0, height),
        };
        b.check().ok().map(|_| b)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let ih = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// A scored instance prediction (or a ground-truth instance, whose score is ignored).
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub class_id: u32,
    pub score: f64,
    /// Region for mask-IoU matching; non-void pixels belong to the instance.
    pub mask: Option<LabelMask>,
}

impl Detection {
    pub fn boxed(frame: u32, bbox: BBox, class_id: u32, score: f64) -> Self {
        Detection { frame, bbox, class_id, score, mask: None }
    }

    pub fn ground_truth(frame: u32, bbox: BBox, class_id: u32) -> Self {
        Self::boxed(frame, bbox, class_id, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_iou_basic() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let b = BBox::new(5.0, 0.0, 15.0, 10.0).unwrap();
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn degenerate_rejected_and_clamping() {
        assert!(BBox::new(3.0, 0.0, 3.0, 1.0).is_err());
        let b = BBox::new(-5.0, -5.0, 5.0, 5.0).unwrap();
        assert_eq!(b.clamped(4.0, 4.0), Some(BBox { x_min: 0.0, y_min: 0.0, x_max: 4.0, y_max: 4.0 }));
        assert_eq!(BBox::new(10.0, 10.0, 12.0, 12.0).unwrap().clamped(4.0, 4.0), None);
    }
}
