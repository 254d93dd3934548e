use serde::{Deserialize, Serialize};

/// World coordinates: x east, y up, z north; meters.
pub type Vec3 = [f64; 3];

/// Pinhole camera with zero pitch and roll.
///
/// Camera frame axes are x right, y up, z forward. At `yaw_deg = 0` the
/// camera looks along world +z; positive yaw turns it toward world +x.
/// The vertical field of view follows from the aspect ratio so that pixels
/// are square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width_px: u32,
    pub height_px: u32,
    pub horizontal_fov_deg: f64,
    pub position: Vec3,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { u: f64, v: f64 },
    Behind,
}

impl Projection {
    pub fn pixel(self) -> Option<(f64, f64)> {
        match self {
            Projection::Pixel { u, v } => Some((u, v)),
            Projection::Behind => None,
        }
    }
}

impl CameraModel {
    pub fn is_valid(&self) -> bool {
        self.width_px >= 16
            && self.height_px >= 16
            && self.horizontal_fov_deg > 0.0
            && self.horizontal_fov_deg < 180.0
            && self.position.iter().all(|c| c.is_finite())
            && self.yaw_deg.is_finite()
    }

    pub fn tan_half_hfov(&self) -> f64 {
        (self.horizontal_fov_deg.to_radians() / 2.0).tan()
    }

    /// tan of half the vertical field of view, derived from the aspect ratio.
    pub fn tan_half_vfov(&self) -> f64 {
        self.tan_half_hfov() * self.height_px as f64 / self.width_px as f64
    }

    pub fn vertical_fov_deg(&self) -> f64 {
        2.0 * self.tan_half_vfov().atan().to_degrees()
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.width_px as f64 / 2.0 / self.tan_half_hfov()
    }

    /// Unit right and forward vectors in world coordinates.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        ([c, 0.0, -s], [s, 0.0, c])
    }

    pub fn to_camera_frame(&self, p: Vec3) -> Vec3 {
        let d = [
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        ];
        let (right, fwd) = self.basis();
        [
            d[0] * right[0] + d[2] * right[2],
            d[1],
            d[0] * fwd[0] + d[2] * fwd[2],
        ]
    }

    /// Projects a camera-frame point.
    pub fn project_camera(&self, c: Vec3) -> Projection {
        let [x, y, z] = c;
        if z <= 0.0 {
            return Projection::Behind;
        }
        let w = self.width_px as f64;
        let h = self.height_px as f64;
        Projection::Pixel {
            u: w / 2.0 * (1.0 + x / (z * self.tan_half_hfov())),
            v: h / 2.0 * (1.0 - y / (z * self.tan_half_vfov())),
        }
    }

    pub fn project(&self, world_point: Vec3) -> Projection {
        self.project_camera(self.to_camera_frame(world_point))
    }
}

/// Free-function form of [`CameraModel::project`].
pub fn project(camera: &CameraModel, world_point: Vec3) -> Projection {
    camera.project(world_point)
}
