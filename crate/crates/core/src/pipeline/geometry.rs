//! Detector-side geometry: input downscaling, box rescaling and the
//! upper-body crop.

use super::config::CropFractions;
use super::PipelineError;
use crate::frame::{resize_frame, BBox, Frame};

/// Detector input size for a frame: `floor(dim * pd_scale)` per axis.
pub fn pd_dims(width: u32, height: u32, pd_scale: f64) -> (u32, u32) {
    // The epsilon absorbs binary representation error in scales like 0.6.
    let f = |d: u32| ((d as f64 * pd_scale + 1e-9).floor() as u32).max(1);
    (f(width), f(height))
}

/// Bilinear downscale to detector input size.
pub fn downscale_for_pd(frame: &Frame, pd_scale: f64) -> Frame {
    let (w, h) = pd_dims(frame.width, frame.height, pd_scale);
    resize_frame(frame, w, h)
}

/// `floor(v * to / from + 1/2)` in exact integer arithmetic.
fn scale_coord(v: u32, from: u32, to: u32) -> u32 {
    ((2 * v as u64 * to as u64 + from as u64) / (2 * from as u64)) as u32
}

/// Rescales a box between image sizes, rounding half up and clamping to the
/// target bounds.
pub fn scale_bbox(b: BBox, from: (u32, u32), to: (u32, u32)) -> BBox {
    BBox {
        x0: scale_coord(b.x0, from.0, to.0).min(to.0),
        y0: scale_coord(b.y0, from.1, to.1).min(to.1),
        x1: scale_coord(b.x1, from.0, to.0).min(to.0),
        y1: scale_coord(b.y1, from.1, to.1).min(to.1),
    }
}

/// Keeps the upper body of a person box by removing floor-rounded
/// fractions of each side.
///
/// A box is degenerate when it is empty, when the crop would empty it, or
/// when it is too small for every side's fraction to remove at least one
/// pixel (narrower than 9 or shorter than 7 px with the defaults).
pub fn crop_upper_body_with(b: BBox, f: &CropFractions) -> Result<BBox, PipelineError> {
    let (w, h) = (b.width(), b.height());
    let cut = [f.left.of(w), f.top.of(h), f.right.of(w), f.bottom.of(h)];
    if b.is_empty() || cut.contains(&0) {
        return Err(PipelineError::DegenerateBox(b));
    }
    let out = BBox {
        x0: b.x0 + cut[0],
        y0: b.y0 + cut[1],
        x1: b.x1.saturating_sub(cut[2]),
        y1: b.y1.saturating_sub(cut[3]),
    };
    if out.is_empty() {
        return Err(PipelineError::DegenerateBox(b));
    }
    Ok(out)
}

/// Upper-body crop with the default fractions: top 1/7, bottom 1/3,
/// left 1/9, right 1/5.
pub fn crop_upper_body(b: BBox) -> Result<BBox, PipelineError> {
    crop_upper_body_with(b, &CropFractions::default())
}
