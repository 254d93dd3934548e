//! Classifier-side transforms: temporal sampling and the crop-and-resize
//! spatial transform.

use rand::Rng;

use super::PipelineError;
use crate::frame::{resize_region, BBox, Frame};

/// An ordered stack of equally sized RGB frames handed to a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: Vec<Frame>,
}

impl Clip {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(u32, u32)> {
        self.frames.first().map(Frame::dims)
    }

    pub fn indices(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.index).collect()
    }

    pub fn mirrored(&self) -> Clip {
        Clip { frames: self.frames.iter().map(Frame::mirrored).collect() }
    }
}

/// Number of distinct consecutive runs of `sample_t` inside `window_m`.
pub fn temporal_offsets(window_m: usize, sample_t: usize) -> usize {
    window_m + 1 - sample_t
}

/// Uniformly chosen start offset for a consecutive run. No value is drawn
/// when the run must start at 0.
pub fn temporal_start<R: Rng + ?Sized>(window_m: usize, sample_t: usize, rng: &mut R) -> usize {
    assert!(sample_t <= window_m, "sample_t exceeds window");
    let n = temporal_offsets(window_m, sample_t);
    if n == 1 {
        0
    } else {
        rng.gen_range(0..n)
    }
}

/// Returns `sample_t` consecutive items of `frames` starting at a uniformly
/// drawn offset, preserving order.
pub fn temporal_sample<'a, T, R: Rng + ?Sized>(frames: &'a [T], sample_t: usize, rng: &mut R) -> &'a [T] {
    let start = temporal_start(frames.len(), sample_t, rng);
    &frames[start..start + sample_t]
}

/// Crops each frame to `bbox` and resizes it bilinearly to `out`, keeping
/// RGB order, frame indices and timestamps.
pub fn prepare_gc_input<F: AsRef<Frame>>(frames: &[F], bbox: BBox, out: (u32, u32)) -> Result<Clip, PipelineError> {
    let mut clip = Vec::with_capacity(frames.len());
    for f in frames {
        let f = f.as_ref();
        if !bbox.is_valid_in(f.width, f.height) {
            return Err(PipelineError::DegenerateBox(bbox));
        }
        clip.push(Frame {
            index: f.index,
            width: out.0,
            height: out.1,
            pixels: resize_region(f, bbox, out.0, out.1),
            sim_time_s: f.sim_time_s,
            wall_time_s: f.wall_time_s,
        });
    }
    Ok(Clip::new(clip))
}

impl AsRef<Frame> for Frame {
    fn as_ref(&self) -> &Frame {
        self
    }
}
