//! Detector that reads the pedestrian box straight from the scene.

use super::{Detector, ModelError};
use crate::frame::{BBox, Frame};
use crate::pipeline::scale_bbox;
use crate::render::silhouette_bbox;
use crate::scenario::ScenarioInstance;

/// Reports the analytic silhouette box of the trial's pedestrian at the
/// frame's index, scaled to the frame's size. Never misses.
#[derive(Debug, Clone)]
pub struct GroundTruthDetector {
    instance: ScenarioInstance,
}

impl GroundTruthDetector {
    pub fn new(instance: ScenarioInstance) -> Self {
        Self { instance }
    }
}

impl Detector for GroundTruthDetector {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError> {
        let cam = &self.instance.camera;
        let Some(b) = silhouette_bbox(&self.instance, frame.index, cam) else {
            return Ok(Vec::new());
        };
        let b = scale_bbox(b, (cam.width_px, cam.height_px), frame.dims());
        Ok(if b.is_empty() { Vec::new() } else { vec![b] })
    }
}
