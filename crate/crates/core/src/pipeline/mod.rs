//! The sliding-window orchestrator: a detector trigger every `stride_s`
//! frames gates a classifier that sees the last `window_m` frames.

pub mod config;
pub mod decision;
pub mod geometry;
pub mod transform;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{ClassMap, CropFractions, Fraction, PipelineConfig};
pub use decision::{mask_and_argmax, GestureDecision};
pub use geometry::{crop_upper_body, crop_upper_body_with, downscale_for_pd, pd_dims, scale_bbox};
pub use transform::{prepare_gc_input, temporal_offsets, temporal_sample, temporal_start, Clip};

use crate::frame::{BBox, Frame};
use crate::models::{validate_boxes, Classifier, Detector, ModelError};
use crate::render::{FrameRingBuffer, RenderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("degenerate box {0:?}")]
    DegenerateBox(BBox),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("detector: {0}")]
    Detector(ModelError),
    #[error("classifier: {0}")]
    Classifier(ModelError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Picks the detection with the largest area; the first one wins ties.
pub fn largest_box(boxes: &[BBox]) -> Option<BBox> {
    boxes.iter().copied().reduce(|best, b| if b.area() > best.area() { b } else { best })
}

/// Result of running the detector path on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Located {
    NoPedestrian,
    /// The person box was found but its upper-body crop is empty.
    Degenerate { detection: BBox },
    /// `detection` is in detector-input coordinates, `crop` in frame
    /// coordinates.
    Found { detection: BBox, crop: BBox },
}

/// Downscales `frame`, runs the detector, keeps the largest box, scales it
/// back to the frame and crops it to the upper body.
pub fn locate(frame: &Frame, detector: &mut dyn Detector, config: &PipelineConfig) -> Result<Located, PipelineError> {
    let small = downscale_for_pd(frame, config.pd_scale);
    let boxes = detector.detect(&small).map_err(PipelineError::Detector)?;
    validate_boxes(&boxes, small.width, small.height).map_err(PipelineError::Detector)?;
    let Some(detection) = largest_box(&boxes) else {
        return Ok(Located::NoPedestrian);
    };
    let full = scale_bbox(detection, small.dims(), frame.dims());
    Ok(match crop_upper_body_with(full, &config.crop_fractions) {
        Ok(crop) => Located::Found { detection, crop },
        Err(_) => Located::Degenerate { detection },
    })
}

/// What one call to [`Pipeline::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// Not a trigger frame.
    Skipped,
    NoPedestrian,
    /// A pedestrian was seen but fewer than `window_m` frames are buffered.
    NotWarm,
    DegenerateBox,
    Decision(GestureDecision),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Detect { frame: u64 },
    Classify { trigger: u64, window: Vec<u64>, sampled: Vec<u64> },
}

/// One trial's orchestrator. Holds the temporal-sampling stream so every
/// classifier call draws from the same seeded sequence.
pub struct Pipeline<'a> {
    config: PipelineConfig,
    detector: &'a mut dyn Detector,
    classifier: &'a mut dyn Classifier,
    rng: ChaCha8Rng,
    trace: Vec<TraceEvent>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        detector: &'a mut dyn Detector,
        classifier: &'a mut dyn Classifier,
        rng: ChaCha8Rng,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config, detector, classifier, rng, trace: Vec::new() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Processes the frame just pushed into `buffer`. The window is read
    /// relative to `frame.index`, so later frames in the buffer are ignored.
    pub fn step(&mut self, frame: &Frame, buffer: &FrameRingBuffer) -> Result<StepOutcome, PipelineError> {
        if frame.index % self.config.stride_s as u64 != 0 {
            return Ok(StepOutcome::Skipped);
        }
        self.trace.push(TraceEvent::Detect { frame: frame.index });
        let crop = match locate(frame, self.detector, &self.config)? {
            Located::NoPedestrian => return Ok(StepOutcome::NoPedestrian),
            Located::Degenerate { .. } => return Ok(StepOutcome::DegenerateBox),
            Located::Found { crop, .. } => crop,
        };
        let window = match buffer.window_ending_at(frame.index, self.config.window_m) {
            Ok(w) => w,
            Err(RenderError::InsufficientFrames { .. }) => return Ok(StepOutcome::NotWarm),
            Err(e) => return Err(e.into()),
        };
        let sampled = temporal_sample(&window, self.config.sample_t, &mut self.rng);
        self.trace.push(TraceEvent::Classify {
            trigger: frame.index,
            window: window.iter().map(|f| f.index).collect(),
            sampled: sampled.iter().map(|f| f.index).collect(),
        });
        let clip = prepare_gc_input(sampled, crop, self.config.gc_input_px)?;
        let raw_scores = self.classifier.classify(&clip).map_err(PipelineError::Classifier)?;
        let (predicted, confidence) = mask_and_argmax(&raw_scores, &self.config.class_map);
        Ok(StepOutcome::Decision(GestureDecision {
            predicted,
            confidence,
            raw_scores,
            frame_index: frame.index,
            bbox: crop,
        }))
    }
}
