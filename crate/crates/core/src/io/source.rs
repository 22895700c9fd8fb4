use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{estimate_flow, FlowDirection, FlowField, FlowParams};
use crate::raster::GrayImage;
use crate::warp::FlowSource;

use super::dataset::VideoData;

/// Where a video's flow fields come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowOrigin {
    /// Estimated on demand from the frame images.
    #[default]
    Builtin,
    /// Read from `flows/{from:06}_{to:06}.flo`.
    Files,
}

/// Flow source backed by a dataset video; frames are decoded once and cached.
pub struct VideoFlowSource<'a> {
    video: &'a VideoData,
    origin: FlowOrigin,
    params: FlowParams,
    frames: Mutex<HashMap<u32, Arc<GrayImage<f32>>>>,
}

impl<'a> VideoFlowSource<'a> {
    pub fn new(video: &'a VideoData, origin: FlowOrigin, params: FlowParams) -> Self {
        VideoFlowSource { video, origin, params, frames: Mutex::new(HashMap::new()) }
    }

    pub fn load(&self, frame: u32) -> Result<Arc<GrayImage<f32>>> {
        if let Some(img) = self.frames.lock().expect("frame cache").get(&frame) {
            return Ok(Arc::clone(img));
        }
        let img = Arc::new(self.video.load_frame::<f32>(frame)?);
        self.frames.lock().expect("frame cache").insert(frame, Arc::clone(&img));
        Ok(img)
    }
}

impl FlowSource<f32> for VideoFlowSource<'_> {
    fn flow(&self, from: u32, to: u32) -> Result<FlowField<f32>> {
        match self.origin {
            FlowOrigin::Files => self.video.load_flow(from, to),
            FlowOrigin::Builtin => {
                let (a, b) = (self.load(from)?, self.load(to)?);
                Ok(estimate_flow(&a, &b, FlowDirection::new(from, to), &self.params)?.field)
            }
        }
    }

    fn frame(&self, frame: u32) -> Option<GrayImage<f32>> {
        self.load(frame).ok().map(|f| (*f).clone())
    }
}
