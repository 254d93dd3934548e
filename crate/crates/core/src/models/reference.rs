//! Background-subtraction pedestrian detector.

use std::sync::Arc;

use super::{Detector, ModelError};
use crate::frame::{off_color_span, BBox, Frame};
use crate::pipeline::{downscale_for_pd, pd_dims};
use crate::render::render_background;
use crate::scenario::CameraModel;

/// Summed absolute RGB difference above which a pixel is foreground.
pub const FOREGROUND_THRESHOLD: u32 = 120;

pub const DEFAULT_MIN_AREA_PX: u64 = 50;

/// Foreground mask: `true` where the L1 distance to the background exceeds
/// [`FOREGROUND_THRESHOLD`].
pub fn foreground_mask(frame: &Frame, background: &Frame) -> Result<Vec<bool>, ModelError> {
    if frame.dims() != background.dims() {
        return Err(ModelError::DimensionMismatch { expected: background.dims(), got: frame.dims() });
    }
    let mut mask = vec![false; frame.pixels.len() / 3];
    let row = frame.width as usize * 3;
    if row == 0 {
        return Ok(mask);
    }
    let rows = frame.pixels.chunks_exact(row).zip(background.pixels.chunks_exact(row));
    for ((a, b), m) in rows.zip(mask.chunks_exact_mut(frame.width as usize)) {
        // Against a single-color background row, pixels outside the frame
        // row's off-color span all share one verdict.
        let (lo, hi) = match off_color_span(b) {
            None => {
                let (lo, hi) = off_color_span(a).unwrap_or((m.len(), m.len()));
                let flat = differs(&a[..3], &b[..3]);
                if flat {
                    m[..lo].fill(true);
                    m[hi..].fill(true);
                }
                (lo, hi)
            }
            Some(_) => (0, m.len()),
        };
        let (a, b) = (&a[lo * 3..hi * 3], &b[lo * 3..hi * 3]);
        for ((p, q), m) in a.chunks_exact(3).zip(b.chunks_exact(3)).zip(&mut m[lo..hi]) {
            *m = differs(p, q);
        }
    }
    Ok(mask)
}

#[inline]
fn differs(p: &[u8], q: &[u8]) -> bool {
    p[0].abs_diff(q[0]) as u32 + p[1].abs_diff(q[1]) as u32 + p[2].abs_diff(q[2]) as u32 > FOREGROUND_THRESHOLD
}

/// 8-connected components of `mask`, as (bounding box, pixel count).
pub fn connected_components(mask: &[bool], width: u32, height: u32) -> Vec<(BBox, u64)> {
    let (w, h) = (width as usize, height as usize);
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        let mut area = 0u64;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = ny * w + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push((BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32), area));
    }
    out
}

/// Boxes around foreground components of at least `min_area_px` pixels,
/// largest component first.
pub fn reference_detect(frame: &Frame, background: &Frame, min_area_px: u64) -> Result<Vec<BBox>, ModelError> {
    let mask = foreground_mask(frame, background)?;
    let mut comps: Vec<_> = connected_components(&mask, frame.width, frame.height)
        .into_iter()
        .filter(|(_, a)| *a >= min_area_px)
        .collect();
    comps.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(comps.into_iter().map(|(b, _)| b).collect())
}

/// [`reference_detect`] against a fixed empty-scene background.
#[derive(Debug, Clone)]
pub struct ReferenceDetector {
    background: Arc<Frame>,
    pub min_area_px: u64,
}

impl ReferenceDetector {
    pub fn new(background: Frame, min_area_px: u64) -> Self {
        Self { background: Arc::new(background), min_area_px }
    }

    /// Background for detector input from `camera` downscaled by `pd_scale`:
    /// the empty scene at unit lighting, downscaled the same way.
    pub fn for_camera(camera: &CameraModel, pd_scale: f64) -> Self {
        let bg = downscale_for_pd(&render_background(camera, 1.0), pd_scale);
        Self::new(bg, DEFAULT_MIN_AREA_PX)
    }

    /// Background for frames of arbitrary size. Matches [`Self::for_camera`]
    /// when `dims` is the detector input size of `camera`.
    pub fn background_for(dims: (u32, u32), camera: &CameraModel, pd_scale: f64) -> Frame {
        if pd_dims(camera.width_px, camera.height_px, pd_scale) == dims {
            downscale_for_pd(&render_background(camera, 1.0), pd_scale)
        } else {
            let cam = CameraModel { width_px: dims.0, height_px: dims.1, ..*camera };
            render_background(&cam, 1.0)
        }
    }

    pub fn background(&self) -> &Frame {
        &self.background
    }
}

impl Detector for ReferenceDetector {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError> {
        reference_detect(frame, &self.background, self.min_area_px)
    }
}

/// Reference detector for frames of any size, building the background for
/// each new input size with [`ReferenceDetector::background_for`].
#[derive(Debug, Clone)]
pub struct AdaptiveReferenceDetector {
    camera: CameraModel,
    pd_scale: f64,
    current: Option<((u32, u32), ReferenceDetector)>,
}

impl AdaptiveReferenceDetector {
    pub fn new(camera: CameraModel, pd_scale: f64) -> Self {
        Self { camera, pd_scale, current: None }
    }
}

impl Detector for AdaptiveReferenceDetector {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError> {
        let dims = frame.dims();
        if self.current.as_ref().is_none_or(|(d, _)| *d != dims) {
            let bg = ReferenceDetector::background_for(dims, &self.camera, self.pd_scale);
            self.current = Some((dims, ReferenceDetector::new(bg, DEFAULT_MIN_AREA_PX)));
        }
        self.current.as_mut().unwrap().1.detect(frame)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fill(f: &mut Frame, b: BBox, c: [u8; 3]) {
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                f.set_pixel(x, y, c);
            }
        }
    }

    #[test]
    fn identical_frame_has_no_detections() {
        let bg = Frame::filled(0, 64, 48, [90, 90, 95]);
        assert!(reference_detect(&bg, &bg, 1).unwrap().is_empty());
    }

    #[test]
    fn single_rectangle() {
        let bg = Frame::filled(0, 100, 100, [90, 90, 95]);
        let mut f = bg.clone();
        let r = BBox::new(30, 20, 50, 70);
        fill(&mut f, r, [200, 40, 40]);
        assert_eq!(reference_detect(&f, &bg, 50).unwrap(), vec![r]);
    }

    #[test]
    fn area_filter() {
        let bg = Frame::filled(0, 100, 100, [0, 0, 0]);
        let mut f = bg.clone();
        fill(&mut f, BBox::new(0, 0, 30, 30), [255, 255, 255]);
        fill(&mut f, BBox::new(60, 60, 70, 70), [255, 255, 255]);
        assert_eq!(reference_detect(&f, &bg, 500).unwrap(), vec![BBox::new(0, 0, 30, 30)]);
        let both = reference_detect(&f, &bg, 1).unwrap();
        assert_eq!(both, vec![BBox::new(0, 0, 30, 30), BBox::new(60, 60, 70, 70)]);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let mask = [true, false, false, true];
        assert_eq!(connected_components(&mask, 2, 2), vec![(BBox::new(0, 0, 2, 2), 2)]);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Frame::filled(0, 10, 10, [0, 0, 0]);
        let b = Frame::filled(0, 10, 11, [0, 0, 0]);
        assert!(matches!(reference_detect(&a, &b, 1), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn lighting_range_stays_below_threshold() {
        use crate::render::raster::{scale_color, ROAD, SKY};
        for bg in [SKY, ROAD] {
            for l in [0.8, 1.2] {
                let c = scale_color(bg, l);
                let d: u32 = c.iter().zip(bg).map(|(&a, b)| a.abs_diff(b) as u32).sum();
                assert!(d <= FOREGROUND_THRESHOLD, "{bg:?} at {l}: {d}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn mask_matches_per_pixel_rule(
            w in 1u32..30, h in 1u32..12, light in 0.5f64..1.5,
            blobs in proptest::collection::vec((0u32..30, 0u32..12, 0u8..=255), 0..15),
            bg_blobs in proptest::collection::vec((0u32..30, 0u32..12), 0..3),
        ) {
            let cam = CameraModel { width_px: w, height_px: h, horizontal_fov_deg: 60.0, position: [0.0; 3], yaw_deg: 0.0 };
            let mut bg = render_background(&cam, 1.0);
            for (x, y) in bg_blobs {
                bg.set_pixel(x % w, y % h, [0, 0, 0]);
            }
            let mut f = render_background(&cam, light);
            for (x, y, v) in blobs {
                f.set_pixel(x % w, y % h, [v, 255 - v, v / 3]);
            }
            let naive: Vec<bool> = f.pixels.chunks_exact(3).zip(bg.pixels.chunks_exact(3)).map(|(p, q)| differs(p, q)).collect();
            proptest::prop_assert_eq!(foreground_mask(&f, &bg).unwrap(), naive);
        }
    }
}
