//! Synthetic moving-shape scenes with analytic ground truth: frames, label masks, exact
//! displacement fields and visibility masks between any two frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{FlowDirection, FlowField};
use crate::fuse::ProbMap;
use crate::model::{Fps, FrameTimeline, LabelMask};
use crate::scalar::Scalar;

/// Label of pixels not covered by any shape.
pub const BACKGROUND_CLASS: u8 = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeGeom {
    Disk { radius: f64 },
    Rect { half_w: f64, half_h: f64 },
}

impl ShapeGeom {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            ShapeGeom::Disk { radius } => x * x + y * y <= radius * radius,
            ShapeGeom::Rect { half_w, half_h } => x.abs() <= half_w && y.abs() <= half_h,
        }
    }

    fn bounding_radius(&self) -> f64 {
        match *self {
            ShapeGeom::Disk { radius } => radius,
            ShapeGeom::Rect { half_w, half_h } => (half_w * half_w + half_h * half_h).sqrt(),
        }
    }
}

/// Rigid shape; later shapes in a scene are drawn over earlier ones.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthShape {
    pub geom: ShapeGeom,
    pub class_id: u8,
    /// Centre at frame 0, in pixels.
    pub center: (f64, f64),
    /// Translation per frame, in pixels.
    pub velocity: (f64, f64),
    /// Rotation per frame, in radians.
    pub angular_velocity: f64,
}

impl SynthShape {
    fn pose(&self, frame: u32) -> (f64, f64, f64) {
        let t = frame as f64;
        (
            self.center.0 + t * self.velocity.0,
            self.center.1 + t * self.velocity.1,
            t * self.angular_velocity,
        )
    }

    /// Shape-local coordinates of image point `(x, y)` at `frame`.
    fn to_local(&self, frame: u32, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy, th) = self.pose(frame);
        let (dx, dy) = (x - cx, y - cy);
        if th == 0.0 {
            return (dx, dy);
        }
        let (s, c) = th.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn to_image(&self, frame: u32, lx: f64, ly: f64) -> (f64, f64) {
        let (cx, cy, th) = self.pose(frame);
        if th == 0.0 {
            return (lx + cx, ly + cy);
        }
        let (s, c) = th.sin_cos();
        (c * lx - s * ly + cx, s * lx + c * ly + cy)
    }
}

/// Band-limited procedural texture: a sum of seeded plane waves.
#[derive(Clone, Debug)]
struct Texture {
    base: f64,
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    fn new(rng: &mut ChaCha8Rng, base: f64, amplitude: f64) -> Self {
        let n = 6;
        let waves = (0..n)
            .map(|_| {
                let period = rng.gen_range(5.0..16.0);
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / period;
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (k * angle.cos(), k * angle.sin(), phase, amplitude / n as f64)
            })
            .collect();
        Texture { base, waves }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.base
            + self
                .waves
                .iter()
                .map(|&(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin())
                .sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct SynthScene {
    pub video_id: String,
    pub width: usize,
    pub height: usize,
    pub frame_count: u32,
    pub key_period: u32,
    pub fps: u32,
    pub seed: u64,
    pub shapes: Vec<SynthShape>,
    background: Texture,
    shape_textures: Vec<Texture>,
}

impl SynthScene {
    /// Builds a scene; rejects shapes that leave the canvas at any frame.
    pub fn new(
        video_id: impl Into<String>,
        width: usize,
        height: usize,
        frame_count: u32,
        key_period: u32,
        seed: u64,
        shapes: Vec<SynthShape>,
    ) -> Result<Self> {
        if width < 8 || height < 8 || frame_count == 0 || key_period == 0 {
            return Err(Error::InvalidData("synthetic scene needs >= 8x8 px, frames and a key period".into()));
        }
        for (i, s) in shapes.iter().enumerate() {
            if s.class_id == BACKGROUND_CLASS || s.class_id == crate::model::VOID_ID {
                return Err(Error::InvalidData(format!("shape {i} uses reserved class {}", s.class_id)));
            }
            let r = s.geom.bounding_radius();
            for f in 0..frame_count {
                let (cx, cy, _) = s.pose(f);
                if cx - r < 0.0 || cy - r < 0.0 || cx + r > (width - 1) as f64 || cy + r > (height - 1) as f64 {
                    return Err(Error::InvalidData(format!("shape {i} leaves the canvas at frame {f}")));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // dark tissue-like background, bright instrument-like shapes
        let background = Texture::new(&mut rng, 70.0, 90.0);
        let shape_textures = shapes
            .iter()
            .enumerate()
            .map(|(i, _)| Texture::new(&mut rng, 200.0 + 15.0 * (i % 3) as f64, 90.0))
            .collect();
        Ok(SynthScene {
            video_id: video_id.into(),
            width,
            height,
            frame_count,
            key_period,
            fps: 30,
            seed,
            shapes,
            background,
            shape_textures,
        })
    }

    /// 64×64, 31 frames, key period 30: a disk moving right and a rectangle moving left,
    /// one integer pixel per frame, never overlapping.
    pub fn translating(seed: u64) -> Self {
        let shapes = vec![
            SynthShape {
                geom: ShapeGeom::Disk { radius: 10.0 },
                class_id: 1,
                center: (17.0, 20.0),
                velocity: (1.0, 0.0),
                angular_velocity: 0.0,
            },
            SynthShape {
                geom: ShapeGeom::Rect { half_w: 6.0, half_h: 5.0 },
                class_id: 2,
                center: (46.0, 46.0),
                velocity: (-1.0, 0.0),
                angular_velocity: 0.0,
            },
        ];
        Self::new("synth_translate", 64, 64, 31, 30, seed, shapes).expect("preset fits canvas")
    }

    /// 64×64, 31 frames: a disk passes over a rectangle, producing occlusions.
    pub fn crossing(seed: u64) -> Self {
        let shapes = vec![
            SynthShape {
                geom: ShapeGeom::Rect { half_w: 5.0, half_h: 7.0 },
                class_id: 2,
                center: (32.0, 12.0),
                velocity: (0.0, 1.0),
                angular_velocity: 0.0,
            },
            SynthShape {
                geom: ShapeGeom::Disk { radius: 8.0 },
                class_id: 1,
                center: (12.0, 32.0),
                velocity: (1.0, 0.0),
                angular_velocity: 0.0,
            },
        ];
        Self::new("synth_crossing", 64, 64, 31, 30, seed, shapes).expect("preset fits canvas")
    }

    /// Same layout as [`SynthScene::translating`] with zero motion.
    pub fn static_scene(seed: u64) -> Self {
        let mut s = Self::translating(seed);
        for shape in &mut s.shapes {
            shape.velocity = (0.0, 0.0);
        }
        s.video_id = "synth_static".into();
        s
    }

    pub fn class_count(&self) -> usize {
        self.shapes.iter().map(|s| s.class_id as usize).max().unwrap_or(0) + 1
    }

    pub fn timeline(&self) -> FrameTimeline {
        let mut t = FrameTimeline::contiguous(self.video_id.clone(), Fps::from_integer(self.fps), self.frame_count);
        t.key_frames = (0..self.frame_count).step_by(self.key_period as usize).collect();
        t
    }

    /// Index of the topmost shape covering image point `(x, y)` at `frame`.
    fn top_shape(&self, frame: u32, x: f64, y: f64) -> Option<usize> {
        self.shapes.iter().enumerate().rev().find_map(|(i, s)| {
            let (lx, ly) = s.to_local(frame, x, y);
            s.geom.contains(lx, ly).then_some(i)
        })
    }

    pub fn mask(&self, frame: u32) -> LabelMask {
        let mut data = Vec::with_capacity(self.width * self.height);
        for v in 0..self.height {
            for u in 0..self.width {
                let id = self
                    .top_shape(frame, u as f64, v as f64)
                    .map_or(BACKGROUND_CLASS, |i| self.shapes[i].class_id);
                data.push(id);
            }
        }
        LabelMask::semantic(self.width, self.height, data).expect("sized")
    }

    /// Intensity before colour tinting, on the 0–255 scale.
    fn intensity(&self, frame: u32, x: f64, y: f64) -> (f64, Option<usize>) {
        match self.top_shape(frame, x, y) {
            Some(i) => {
                let (lx, ly) = self.shapes[i].to_local(frame, x, y);
                (self.shape_textures[i].eval(lx, ly), Some(i))
            }
            None => (self.background.eval(x, y), None),
        }
    }

    pub fn render(&self, frame: u32) -> image::RgbImage {
        const TINTS: [[f64; 3]; 4] = [[1.0, 0.92, 0.85], [1.0, 0.7, 0.6], [0.6, 0.8, 1.0], [0.8, 1.0, 0.7]];
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |u, v| {
            let (val, layer) = self.intensity(frame, u as f64, v as f64);
            let tint = TINTS[layer.map_or(0, |i| 1 + i % 3)];
            let px = tint.map(|t| (val * t).round().clamp(0.0, 255.0) as u8);
            image::Rgb(px)
        })
    }

    /// Position at frame `to` of the surface point seen at pixel `(x, y)` of frame `from`.
    fn track(&self, from: u32, to: u32, x: f64, y: f64) -> ((f64, f64), Option<usize>) {
        match self.top_shape(from, x, y) {
            Some(i) => {
                let s = &self.shapes[i];
                let (lx, ly) = s.to_local(from, x, y);
                (s.to_image(to, lx, ly), Some(i))
            }
            None => ((x, y), None),
        }
    }

    /// Exact displacement field `from → to`: each pixel follows the surface it shows.
    pub fn flow<T: Scalar>(&self, from: u32, to: u32) -> FlowField<T> {
        FlowField::from_fn(self.width, self.height, FlowDirection::new(from, to), |u, v| {
            let ((x, y), _) = self.track(from, to, u as f64, v as f64);
            (T::lit(x - u as f64), T::lit(y - v as f64))
        })
    }

    /// True where the surface shown at a pixel of `from` is still visible at `to`.
    pub fn visibility(&self, from: u32, to: u32) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for v in 0..self.height {
            for u in 0..self.width {
                let ((x, y), layer) = self.track(from, to, u as f64, v as f64);
                out.push(self.top_shape(to, x, y) == layer);
            }
        }
        out
    }

    /// Segmentation-branch stand-in: `peak` on the true class, the rest spread evenly.
    pub fn prob_map<T: Scalar>(&self, frame: u32, peak: f64) -> ProbMap<T> {
        let c = self.class_count();
        let mask = self.mask(frame);
        let rest = if c > 1 { (1.0 - peak) / (c - 1) as f64 } else { 0.0 };
        let n = self.width * self.height;
        let mut p = vec![T::lit(rest); c * n];
        for (i, &id) in mask.data().iter().enumerate() {
            p[id as usize * n + i] = T::lit(peak);
        }
        ProbMap::new(self.width, self.height, c, p).expect("normalised")
    }
}
