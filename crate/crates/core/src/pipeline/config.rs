use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::models::NUM_CLASSES;
use crate::scenario::GestureClass;

/// `num / den` of a box side, removed with floor rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Fraction {
    pub const fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }

    /// `floor(len * num / den)`.
    pub fn of(&self, len: u32) -> u32 {
        (len as u64 * self.num as u64 / self.den as u64) as u32
    }
}

/// Fractions of the person box removed to keep the upper body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropFractions {
    pub top: Fraction,
    pub bottom: Fraction,
    pub left: Fraction,
    pub right: Fraction,
}

impl Default for CropFractions {
    fn default() -> Self {
        Self {
            top: Fraction::new(1, 7),
            bottom: Fraction::new(1, 3),
            left: Fraction::new(1, 9),
            right: Fraction::new(1, 5),
        }
    }
}

/// Where each gesture sits in the 27-slot classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<GestureClass, usize>", into = "BTreeMap<GestureClass, usize>")]
pub struct ClassMap([usize; 5]);

impl Default for ClassMap {
    fn default() -> Self {
        ClassMap([0, 1, 2, 3, 4])
    }
}

impl ClassMap {
    pub fn new(indices: [usize; 5]) -> Result<Self, PipelineError> {
        if indices.iter().any(|&i| i >= NUM_CLASSES) {
            return Err(PipelineError::InvalidConfig(format!("class index outside 0..{NUM_CLASSES}")));
        }
        for i in 0..5 {
            if indices[i + 1..].contains(&indices[i]) {
                return Err(PipelineError::InvalidConfig("class_map is not injective".into()));
            }
        }
        Ok(ClassMap(indices))
    }

    pub fn index(&self, g: GestureClass) -> usize {
        self.0[g.ordinal()]
    }

    /// Gestures in ascending order of their mapped index.
    pub fn by_index(&self) -> [GestureClass; 5] {
        let mut gs = GestureClass::ALL;
        gs.sort_by_key(|g| self.index(*g));
        gs
    }

    pub fn is_mapped(&self, slot: usize) -> bool {
        self.0.contains(&slot)
    }
}

impl TryFrom<BTreeMap<GestureClass, usize>> for ClassMap {
    type Error = PipelineError;

    fn try_from(m: BTreeMap<GestureClass, usize>) -> Result<Self, Self::Error> {
        let mut idx = [0usize; 5];
        for g in GestureClass::ALL {
            idx[g.ordinal()] = *m
                .get(&g)
                .ok_or_else(|| PipelineError::InvalidConfig(format!("class_map missing {g}")))?;
        }
        ClassMap::new(idx)
    }
}

impl From<ClassMap> for BTreeMap<GestureClass, usize> {
    fn from(c: ClassMap) -> Self {
        GestureClass::ALL.iter().map(|&g| (g, c.index(g))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Detector runs on frames with `index % stride_s == 0`.
    pub stride_s: u32,
    pub pd_input_frames_n: u32,
    /// Frames handed to the classifier path.
    pub window_m: usize,
    /// Consecutive frames sampled from the window.
    pub sample_t: usize,
    pub gc_input_px: (u32, u32),
    pub pd_scale: f64,
    pub crop_fractions: CropFractions,
    pub class_map: ClassMap,
    /// Evaluation-time threshold; not applied by the live pipeline.
    pub confidence_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stride_s: 5,
            pd_input_frames_n: 1,
            window_m: 40,
            sample_t: 32,
            gc_input_px: (112, 112),
            pd_scale: 0.6,
            crop_fractions: CropFractions::default(),
            class_map: ClassMap::default(),
            confidence_threshold: 0.40,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.stride_s < 1 {
            return bad("stride_s must be >= 1".into());
        }
        if self.pd_input_frames_n != 1 {
            return bad("only single-frame detector input is supported".into());
        }
        if self.sample_t == 0 || self.sample_t > self.window_m {
            return bad(format!("sample_t {} must be in 1..=window_m {}", self.sample_t, self.window_m));
        }
        if !(self.pd_scale > 0.0 && self.pd_scale <= 1.0) {
            return bad(format!("pd_scale {} outside (0, 1]", self.pd_scale));
        }
        if self.gc_input_px.0 == 0 || self.gc_input_px.1 == 0 {
            return bad("gc_input_px must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return bad(format!("confidence threshold {} outside [0, 1]", self.confidence_threshold));
        }
        for f in [self.crop_fractions.top, self.crop_fractions.bottom, self.crop_fractions.left, self.crop_fractions.right] {
            if f.den == 0 || f.num >= f.den {
                return bad("crop fractions must be proper fractions".into());
            }
        }
        ClassMap::new(self.class_map.0)?;
        Ok(())
    }

    /// First stride-aligned frame index at which a full window is buffered
    /// when streaming starts at frame 0.
    pub fn first_warm_trigger(&self) -> u64 {
        let s = self.stride_s as u64;
        let need = self.window_m as u64 - 1;
        need.div_ceil(s) * s
    }

    /// Frames streamed per trial.
    pub fn frames_per_trial(&self) -> u64 {
        self.window_m as u64 + self.stride_s as u64
    }

    /// Ring buffer capacity that never evicts a frame within a trial.
    pub fn buffer_capacity(&self) -> usize {
        (self.window_m + self.stride_s as usize).max(40)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.first_warm_trigger(), 40);
        assert_eq!(c.frames_per_trial(), 45);
    }

    #[test]
    fn class_map_must_be_injective() {
        assert!(ClassMap::new([0, 1, 2, 3, 3]).is_err());
        assert!(ClassMap::new([0, 1, 2, 3, 27]).is_err());
        assert!(ClassMap::new([26, 1, 2, 3, 0]).is_ok());
    }

    #[test]
    fn class_map_json() {
        let json = serde_json::to_string(&ClassMap::default()).unwrap();
        assert_eq!(json, r#"{"go_forward":0,"stop":1,"go_right":2,"go_left":3,"no_gesture":4}"#);
        assert!(serde_json::from_str::<ClassMap>(r#"{"go_forward":0,"stop":0,"go_right":2,"go_left":3,"no_gesture":4}"#).is_err());
    }

    #[test]
    fn rejects_oversized_sample() {
        let c = PipelineConfig { sample_t: 41, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
