//! Frame production: rasterization, the simulator clock, the frame ring
//! buffer and the streamer that ties them together.

pub mod clock;
pub mod raster;
pub mod ring;
pub mod stream;

use thiserror::Error;

pub use clock::{sim_fps, SimClock};
pub use raster::{
    render_background, render_frame, silhouette_bbox, trial_lighting, Renderer, DEFAULT_LIGHTING_RANGE,
};
pub use ring::{latest_window, FrameRingBuffer};
pub use stream::{Pacing, StreamStats, Streamer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("need {needed} buffered frames, have {available}")]
    InsufficientFrames { needed: usize, available: usize },
    #[error("ring buffer capacity {0} is below the 40-frame minimum")]
    CapacityTooSmall(usize),
    #[error("frame {got} does not follow buffer head (expected {expected})")]
    NonContiguous { expected: u64, got: u64 },
    #[error("frame {0} was evicted before the consumer reached it")]
    FrameDropped(u64),
    #[error("invalid clock: {0}")]
    InvalidClock(String),
}
