//! Run configuration shared by the library entry points and the CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::NoisyOracleConfig;
use crate::pipeline::PipelineConfig;
use crate::render::{SimClock, DEFAULT_LIGHTING_RANGE};
use crate::scenario::{scenario_gestures, ScenarioGesture, ScenarioId, World, DEFAULT_JITTER_RAD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid model source {0:?}: expected builtin:template, builtin:oracle or remote:<addr>")]
    ModelSource(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinModel {
    /// Reference detector and template classifier.
    Template,
    /// Ground-truth detector and noisy oracle classifier.
    Oracle,
}

/// Where detector and classifier come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSource {
    Builtin(BuiltinModel),
    /// Both plugins served at `addr`.
    Remote(String),
}

impl Default for ModelSource {
    fn default() -> Self {
        ModelSource::Builtin(BuiltinModel::Template)
    }
}

impl FromStr for ModelSource {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("builtin", "template")) => Ok(ModelSource::Builtin(BuiltinModel::Template)),
            Some(("builtin", "oracle")) => Ok(ModelSource::Builtin(BuiltinModel::Oracle)),
            Some(("remote", addr)) if !addr.is_empty() => Ok(ModelSource::Remote(addr.to_owned())),
            _ => Err(ConfigError::ModelSource(s.to_owned())),
        }
    }
}

impl fmt::Display for ModelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSource::Builtin(BuiltinModel::Template) => f.write_str("builtin:template"),
            ModelSource::Builtin(BuiltinModel::Oracle) => f.write_str("builtin:oracle"),
            ModelSource::Remote(a) => write!(f, "remote:{a}"),
        }
    }
}

impl TryFrom<String> for ModelSource {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ModelSource> for String {
    fn from(m: ModelSource) -> Self {
        m.to_string()
    }
}

/// Camera intrinsics applied to every scenario, plus the stream clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub horizontal_fov_deg: f64,
    pub clock_scale: f64,
    pub wall_interval_s: f64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        let clock = SimClock::default();
        Self {
            width_px: 1280,
            height_px: 480,
            horizontal_fov_deg: 50.0,
            clock_scale: clock.clock_scale,
            wall_interval_s: clock.wall_interval_s,
        }
    }
}

impl StreamConfig {
    pub fn clock(&self) -> SimClock {
        SimClock { clock_scale: self.clock_scale, wall_interval_s: self.wall_interval_s }
    }
}

/// Per-trial variability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub jitter_amplitude_rad: f64,
    /// Lighting scale is drawn uniformly from `[lo, hi)`; equal bounds fix it.
    pub lighting_range: (f64, f64),
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self { jitter_amplitude_rad: DEFAULT_JITTER_RAD, lighting_range: DEFAULT_LIGHTING_RANGE }
    }
}

impl VariationConfig {
    /// No jitter and unit lighting.
    pub fn clean() -> Self {
        Self { jitter_amplitude_rad: 0.0, lighting_range: (1.0, 1.0) }
    }
}

/// Everything that determines a run's records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub trials_per_sg: u32,
    pub scenarios: Vec<ScenarioId>,
    pub stream: StreamConfig,
    pub variation: VariationConfig,
    pub pipeline: PipelineConfig,
    pub model: ModelSource,
    /// Confusion model for `builtin:oracle`; identity when absent.
    pub oracle: Option<NoisyOracleConfig>,
    /// Render without wall-clock pacing.
    pub fast_forward: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            trials_per_sg: 2000,
            scenarios: ScenarioId::ALL.to_vec(),
            stream: StreamConfig::default(),
            variation: VariationConfig::default(),
            pipeline: PipelineConfig::default(),
            model: ModelSource::default(),
            oracle: None,
            fast_forward: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.trials_per_sg < 1 {
            return bad("trials_per_sg must be >= 1".into());
        }
        if self.scenarios.is_empty() {
            return bad("at least one scenario is required".into());
        }
        let mut s = self.scenarios.clone();
        s.sort();
        s.dedup();
        if s.len() != self.scenarios.len() {
            return bad("scenarios listed twice".into());
        }
        self.stream.clock().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.pipeline.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let v = &self.variation;
        if !(v.jitter_amplitude_rad >= 0.0 && v.jitter_amplitude_rad.is_finite()) {
            return bad(format!("jitter amplitude {} must be finite and >= 0", v.jitter_amplitude_rad));
        }
        let (lo, hi) = v.lighting_range;
        if !(lo > 0.0 && lo <= hi && hi <= 2.0) {
            return bad(format!("lighting range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 2"));
        }
        self.world()?;
        Ok(())
    }

    /// The bundled world with this run's intrinsics and jitter.
    pub fn world(&self) -> Result<World, ConfigError> {
        World::bundled()
            .clone()
            .with_camera_intrinsics(self.stream.width_px, self.stream.height_px, self.stream.horizontal_fov_deg)
            .map(|w| w.with_jitter(self.variation.jitter_amplitude_rad))
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Scenario-gestures covered by the run, in record order.
    pub fn scenario_gestures(&self) -> Vec<ScenarioGesture> {
        let mut s = self.scenarios.clone();
        s.sort();
        scenario_gestures(&s)
    }

    pub fn oracle_config(&self) -> NoisyOracleConfig {
        self.oracle.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_source_round_trips() {
        for s in ["builtin:template", "builtin:oracle", "remote:127.0.0.1:9000"] {
            assert_eq!(s.parse::<ModelSource>().unwrap().to_string(), s);
        }
        for s in ["builtin:cnn", "remote:", "template"] {
            assert!(s.parse::<ModelSource>().is_err());
        }
    }

    #[test]
    fn defaults_validate_and_serialize() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
        assert_eq!(c.scenario_gestures().len(), 14);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"master_seed": 7, "scenarios": [4], "pipeline": {"stride_s": 4}}"#).unwrap();
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.pipeline.stride_s, 4);
        assert_eq!(c.pipeline.window_m, 40);
        assert_eq!(c.scenario_gestures().len(), 3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 7}"#).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let c = RunConfig { trials_per_sg: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { variation: VariationConfig { lighting_range: (1.3, 1.2), ..Default::default() }, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
