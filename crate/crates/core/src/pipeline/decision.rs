use serde::{Deserialize, Serialize};

use super::config::ClassMap;
use crate::frame::BBox;
use crate::models::ClassScores;
use crate::scenario::GestureClass;

/// The pipeline's raw verdict for one trigger. Thresholding happens at
/// evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureDecision {
    pub predicted: GestureClass,
    pub confidence: f32,
    pub raw_scores: ClassScores,
    pub frame_index: u64,
    /// Upper-body box in original frame coordinates.
    pub bbox: BBox,
}

/// Restricts scores to the five mapped gestures, without renormalizing, and
/// returns the most confident one. Ties go to the lowest mapped index.
pub fn mask_and_argmax(scores: &ClassScores, class_map: &ClassMap) -> (GestureClass, f32) {
    let mut best: Option<(GestureClass, f32)> = None;
    for g in class_map.by_index() {
        let s = scores.get(class_map.index(g));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((g, s));
        }
    }
    best.expect("five mapped classes")
}
