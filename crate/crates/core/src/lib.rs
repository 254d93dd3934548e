//! Deterministic simulator and benchmark harness for pedestrian
//! hand-gesture recognition pipelines.
//!
//! A procedural scene is rendered frame by frame into a ring buffer. A
//! detector runs every few frames; when it finds a pedestrian and enough
//! frames are buffered, an upper-body clip goes to a gesture classifier.
//! The evaluation module runs many seeded trials per scenario-gesture pair
//! and reports confusion matrices, precision-recall curves and
//! accuracy/F1 tables.

pub mod config;
pub mod eval;
pub mod frame;
pub mod models;
pub mod pipeline;
pub mod render;
pub mod scenario;
pub mod seed;

pub use frame::{BBox, Frame};
pub use scenario::{GestureClass, ScenarioGesture, ScenarioId, World};

/// Code samples from the book, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
