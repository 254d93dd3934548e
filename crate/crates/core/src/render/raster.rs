//! Software rasterizer: two background bands and a capsule stick figure.

use rand::Rng;

use crate::frame::{BBox, Frame, CHANNELS};
use crate::scenario::{CameraModel, Capsule, ScenarioInstance};
use crate::seed;

pub const SKY: [u8; 3] = [120, 160, 200];
pub const ROAD: [u8; 3] = [90, 90, 95];
pub const PEDESTRIAN: [u8; 3] = [200, 40, 40];

pub const DEFAULT_LIGHTING_RANGE: (f64, f64) = (0.8, 1.2);

/// `clamp(round(v * lighting), 0, 255)` per channel.
pub fn scale_color(c: [u8; 3], lighting: f64) -> [u8; 3] {
    c.map(|v| (v as f64 * lighting).round().clamp(0.0, 255.0) as u8)
}

/// Per-trial lighting scale, uniform over `range`.
pub fn trial_lighting(instance: &ScenarioInstance, range: (f64, f64)) -> f64 {
    if range.0 >= range.1 {
        return range.0;
    }
    seed::stream(instance.trial_seed, seed::tag::LIGHTING, 0).gen_range(range.0..range.1)
}

/// True when the pixel row lies above the horizon. With zero camera pitch
/// the horizon is the image's horizontal center line.
#[inline]
fn is_sky_row(y: u32, height: u32) -> bool {
    (2 * y + 1) < height
}

/// An empty-scene render: sky above the horizon, road below.
pub fn render_background(camera: &CameraModel, lighting: f64) -> Frame {
    let (w, h) = (camera.width_px, camera.height_px);
    let sky = scale_color(SKY, lighting);
    let road = scale_color(ROAD, lighting);
    let row = |c: [u8; 3]| c.repeat(w as usize);
    let (sky_row, road_row) = (row(sky), row(road));
    let mut pixels = Vec::with_capacity(w as usize * h as usize * CHANNELS);
    for y in 0..h {
        pixels.extend_from_slice(if is_sky_row(y, h) { &sky_row } else { &road_row });
    }
    Frame::new(0, w, h, pixels)
}

/// A capsule after projection: pixel-space endpoints and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedCapsule {
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub radius_px: f64,
}

impl ProjectedCapsule {
    /// Whether the pixel center of `(x, y)` lies within the capsule.
    #[inline]
    pub fn covers(&self, x: u32, y: u32) -> bool {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((px - self.a.0) * dx + (py - self.a.1) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (cx, cy) = (self.a.0 + t * dx - px, self.a.1 + t * dy - py);
        cx * cx + cy * cy <= self.radius_px * self.radius_px
    }

    /// Pixel range that may contain covered pixels, clipped to the image.
    pub fn pixel_range(&self, width: u32, height: u32) -> Option<BBox> {
        let r = self.radius_px;
        let lo = |a: f64, b: f64| (a.min(b) - r).floor().max(0.0);
        let hi = |a: f64, b: f64, m: u32| (a.max(b) + r).ceil().min(m as f64);
        let x0 = lo(self.a.0, self.b.0);
        let y0 = lo(self.a.1, self.b.1);
        let x1 = hi(self.a.0, self.b.0, width);
        let y1 = hi(self.a.1, self.b.1, height);
        (x0 < x1 && y0 < y1).then(|| BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }
}

/// Projects every capsule, or `None` when the figure is not in front of the
/// camera.
pub fn project_capsules(camera: &CameraModel, capsules: &[Capsule]) -> Option<Vec<ProjectedCapsule>> {
    let f = camera.focal_px();
    capsules
        .iter()
        .map(|c| {
            let ca = camera.to_camera_frame(c.a);
            let cb = camera.to_camera_frame(c.b);
            let a = camera.project_camera(ca).pixel()?;
            let b = camera.project_camera(cb).pixel()?;
            // The body plane is parallel to the image plane, so both
            // endpoints share one depth.
            Some(ProjectedCapsule { a, b, radius_px: f * c.radius / ca[2] })
        })
        .collect()
}

/// Conservative bounding box of the pedestrian's pixels at `frame_index`.
pub fn silhouette_bbox(instance: &ScenarioInstance, frame_index: u64, camera: &CameraModel) -> Option<BBox> {
    let caps = project_capsules(camera, &instance.capsules(frame_index))?;
    caps.iter()
        .filter_map(|c| c.pixel_range(camera.width_px, camera.height_px))
        .reduce(|a, b| a.union(&b))
}

fn draw_pedestrian(frame: &mut Frame, caps: &[ProjectedCapsule], color: [u8; 3]) {
    for cap in caps {
        let Some(r) = cap.pixel_range(frame.width, frame.height) else { continue };
        for y in r.y0..r.y1 {
            for x in r.x0..r.x1 {
                if cap.covers(x, y) {
                    frame.set_pixel(x, y, color);
                }
            }
        }
    }
}

/// Renders one frame of a trial.
///
/// Lighting scales every channel of every pixel before clamping. Frame
/// timestamps are left at zero; the streamer stamps them.
pub fn render_frame(instance: &ScenarioInstance, frame_index: u64, camera: &CameraModel, lighting_scale: f64) -> Frame {
    Renderer::new(instance.clone(), *camera, lighting_scale).render(frame_index)
}

/// Renders the frames of one trial, reusing a cached background.
#[derive(Debug, Clone)]
pub struct Renderer {
    instance: ScenarioInstance,
    camera: CameraModel,
    lighting: f64,
    background: Frame,
}

impl Renderer {
    pub fn new(instance: ScenarioInstance, camera: CameraModel, lighting_scale: f64) -> Self {
        assert!(
            lighting_scale > 0.0 && lighting_scale <= 2.0,
            "lighting scale {lighting_scale} outside (0, 2]"
        );
        let background = render_background(&camera, lighting_scale);
        Self { instance, camera, lighting: lighting_scale, background }
    }

    pub fn instance(&self) -> &ScenarioInstance {
        &self.instance
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn lighting(&self) -> f64 {
        self.lighting
    }

    pub fn render(&self, frame_index: u64) -> Frame {
        let mut f = self.background.clone();
        self.draw(frame_index, &mut f);
        f
    }

    /// Renders into `frame`, reusing its allocation.
    pub fn render_into(&self, frame_index: u64, frame: &mut Frame) {
        frame.width = self.background.width;
        frame.height = self.background.height;
        frame.pixels.clear();
        frame.pixels.extend_from_slice(&self.background.pixels);
        frame.sim_time_s = 0.0;
        frame.wall_time_s = 0.0;
        self.draw(frame_index, frame);
    }

    fn draw(&self, frame_index: u64, frame: &mut Frame) {
        frame.index = frame_index;
        let caps = self.instance.capsules(frame_index);
        if let Some(projected) = project_capsules(&self.camera, &caps) {
            draw_pedestrian(frame, &projected, scale_color(PEDESTRIAN, self.lighting));
        }
    }
}
