use serde::{Deserialize, Serialize};

use super::RenderError;

/// Simulator clock: `clock_scale` simulator seconds elapse per wall second,
/// and one frame is pulled every `wall_interval_s` wall seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub clock_scale: f64,
    pub wall_interval_s: f64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self { clock_scale: 0.14, wall_interval_s: 0.566 }
    }
}

impl SimClock {
    pub fn new(clock_scale: f64, wall_interval_s: f64) -> Result<Self, RenderError> {
        let c = Self { clock_scale, wall_interval_s };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.clock_scale > 0.0 && self.clock_scale <= 1.0) {
            return Err(RenderError::InvalidClock(format!("clock_scale {} outside (0, 1]", self.clock_scale)));
        }
        if !(self.wall_interval_s > 0.0 && self.wall_interval_s.is_finite()) {
            return Err(RenderError::InvalidClock(format!("wall_interval_s {} must be positive", self.wall_interval_s)));
        }
        Ok(())
    }

    /// Simulator seconds between consecutive frames.
    pub fn frame_interval_sim_s(&self) -> f64 {
        self.wall_interval_s * self.clock_scale
    }

    /// Frames per simulator second.
    pub fn sim_fps(&self) -> f64 {
        1.0 / self.frame_interval_sim_s()
    }

    pub fn sim_time(&self, index: u64) -> f64 {
        index as f64 * self.frame_interval_sim_s()
    }
}

pub fn sim_fps(clock: &SimClock) -> f64 {
    clock.sim_fps()
}
