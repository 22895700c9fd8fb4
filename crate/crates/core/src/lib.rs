//! Key-frame label propagation through optical flow, confidence-gated fusion with external
//! segmentation probabilities, and an evaluation toolkit for surgical video
//! (segmentation, detection, phase/step classification, step anticipation).
//!
//! Numeric rasters are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix the
//! precision used by the command-line tool and file formats.

pub mod error;
pub mod flow;
pub mod fuse;
pub mod io;
pub mod metrics;
pub mod model;
pub mod overlay;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FlowField32 = flow::FlowField<f32>;
pub type FlowField64 = flow::FlowField<f64>;
pub type ConfidenceMap32 = model::ConfidenceMap<f32>;
pub type ConfidenceMap64 = model::ConfidenceMap<f64>;
pub type GrayImage32 = raster::GrayImage<f32>;
pub type GrayImage64 = raster::GrayImage<f64>;
