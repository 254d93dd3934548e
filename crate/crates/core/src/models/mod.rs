//! Detector and classifier plugins: the interfaces, the built-in reference
//! models and the wire protocol used to attach external ones.

pub mod oracle;
pub mod protocol;
pub mod reference;
pub mod remote;
pub mod template;
pub mod truth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{BBox, Frame};
use crate::pipeline::Clip;

pub use oracle::{oracle_classify, NoisyOracleConfig, OracleClassifier};
pub use reference::{reference_detect, AdaptiveReferenceDetector, ReferenceDetector, DEFAULT_MIN_AREA_PX, FOREGROUND_THRESHOLD};
pub use remote::{serve, PluginServer, RemoteClassifier, RemoteDetector, ServerHandle};
pub use template::{template_classify, TemplateBank, TemplateClassifier, DEFAULT_ALPHA};
pub use truth::GroundTruthDetector;

/// Size of the classifier output space.
pub const NUM_CLASSES: usize = 27;

/// Score written to every unmapped slot by the built-in classifiers.
pub const FLOOR: f32 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (u32, u32), got: (u32, u32) },
    #[error("clip has no foreground pixels")]
    EmptyClip,
    #[error("invalid scores: {0}")]
    InvalidScores(String),
    #[error("detector box {bbox:?} outside a {width}x{height} frame")]
    InvalidBox { bbox: BBox, width: u32, height: u32 },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("remote error {code}: {message}")]
    Remote { code: u16, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}

/// A 27-slot confidence vector with every entry finite and in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct ClassScores([f32; NUM_CLASSES]);

impl ClassScores {
    pub fn new(scores: Vec<f32>) -> Result<Self, ModelError> {
        let arr: [f32; NUM_CLASSES] = scores
            .try_into()
            .map_err(|v: Vec<f32>| ModelError::InvalidScores(format!("expected {NUM_CLASSES} scores, got {}", v.len())))?;
        Self::from_array(arr)
    }

    pub fn from_array(scores: [f32; NUM_CLASSES]) -> Result<Self, ModelError> {
        if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(ModelError::InvalidScores(format!("score {s} at slot {i} outside [0, 1]")));
        }
        Ok(ClassScores(scores))
    }

    /// All slots at `value`.
    pub fn splat(value: f32) -> Result<Self, ModelError> {
        Self::from_array([value; NUM_CLASSES])
    }

    pub fn get(&self, slot: usize) -> f32 {
        self.0[slot]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

impl TryFrom<Vec<f32>> for ClassScores {
    type Error = ModelError;

    fn try_from(v: Vec<f32>) -> Result<Self, Self::Error> {
        ClassScores::new(v)
    }
}

impl From<ClassScores> for Vec<f32> {
    fn from(s: ClassScores) -> Self {
        s.0.to_vec()
    }
}

/// First-stage model: finds pedestrians in a downscaled frame.
pub trait Detector {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError>;
}

/// Second-stage model: scores a clip over the 27 classes.
pub trait Classifier {
    fn classify(&mut self, clip: &Clip) -> Result<ClassScores, ModelError>;
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError> {
        (**self).detect(frame)
    }
}

impl<C: Classifier + ?Sized> Classifier for Box<C> {
    fn classify(&mut self, clip: &Clip) -> Result<ClassScores, ModelError> {
        (**self).classify(clip)
    }
}

/// Checks the detector contract: every box nonempty and inside the frame.
pub fn validate_boxes(boxes: &[BBox], width: u32, height: u32) -> Result<(), ModelError> {
    match boxes.iter().find(|b| !b.is_valid_in(width, height)) {
        Some(&bbox) => Err(ModelError::InvalidBox { bbox, width, height }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scores_reject_wrong_length_and_range() {
        assert!(ClassScores::new(vec![0.5; 26]).is_err());
        assert!(ClassScores::new(vec![0.5; 28]).is_err());
        let mut v = vec![0.5; 27];
        v[3] = 1.5;
        assert!(ClassScores::new(v.clone()).is_err());
        v[3] = f32::NAN;
        assert!(ClassScores::new(v).is_err());
        assert!(ClassScores::new(vec![0.0; 27]).is_ok());
    }

    #[test]
    fn scores_json_is_a_plain_array() {
        let s = ClassScores::splat(0.25).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with("[0.25,"));
        assert_eq!(serde_json::from_str::<ClassScores>(&json).unwrap(), s);
    }
}
