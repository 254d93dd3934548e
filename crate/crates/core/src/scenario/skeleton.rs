//! Stick-figure body model.
//!
//! The pedestrian is a set of capsules lying in a vertical plane parallel to
//! the image plane, so every capsule projects to a 2D capsule with radius
//! `focal * r / depth`.

use super::camera::{CameraModel, Vec3};
use super::track::JointAngles;

// Proportions as fractions of body height.
const HEAD_Y: f64 = 0.925;
const HEAD_R: f64 = 0.065;
const SHOULDER_Y: f64 = 0.81;
const SHOULDER_X: f64 = 0.11;
const TORSO_TOP: f64 = 0.82;
const TORSO_BOTTOM: f64 = 0.54;
const TORSO_R: f64 = 0.10;
const HIP_Y: f64 = 0.52;
const HIP_X: f64 = 0.06;
const FOOT_Y: f64 = 0.03;
const FOOT_X: f64 = 0.08;
const LEG_R: f64 = 0.045;
const UPPER_ARM: f64 = 0.17;
const FOREARM: f64 = 0.16;
const ARM_R: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limb {
    Head,
    Torso,
    LeftLeg,
    RightLeg,
    LeftUpperArm,
    LeftForearm,
    RightUpperArm,
    RightForearm,
}

/// A segment swept by a sphere, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub limb: Limb,
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

/// Capsule endpoints in body-plane coordinates `(lateral, up)`, meters.
/// Positive lateral is the pedestrian's left.
pub fn body_plane_capsules(height_m: f64, pose: &JointAngles) -> Vec<(Limb, [f64; 2], [f64; 2], f64)> {
    let h = height_m;
    let arm = |side: f64, shoulder: f64, elbow: f64| {
        let s = [side * SHOULDER_X * h, SHOULDER_Y * h];
        let e = [
            s[0] + side * UPPER_ARM * h * shoulder.sin(),
            s[1] - UPPER_ARM * h * shoulder.cos(),
        ];
        let fa = shoulder + elbow;
        let w = [
            e[0] + side * FOREARM * h * fa.sin(),
            e[1] - FOREARM * h * fa.cos(),
        ];
        (s, e, w)
    };
    let (ls, le, lw) = arm(1.0, pose.ls, pose.le);
    let (rs, re, rw) = arm(-1.0, pose.rs, pose.re);
    vec![
        (Limb::Head, [0.0, HEAD_Y * h], [0.0, HEAD_Y * h], HEAD_R * h),
        (Limb::Torso, [0.0, TORSO_TOP * h], [0.0, TORSO_BOTTOM * h], TORSO_R * h),
        (Limb::LeftLeg, [HIP_X * h, HIP_Y * h], [FOOT_X * h, FOOT_Y * h], LEG_R * h),
        (Limb::RightLeg, [-HIP_X * h, HIP_Y * h], [-FOOT_X * h, FOOT_Y * h], LEG_R * h),
        (Limb::LeftUpperArm, ls, le, ARM_R * h),
        (Limb::LeftForearm, le, lw, ARM_R * h),
        (Limb::RightUpperArm, rs, re, ARM_R * h),
        (Limb::RightForearm, re, rw, ARM_R * h),
    ]
}

/// World-space capsules for a pedestrian standing at `feet` and facing the
/// camera.
pub fn body_capsules(
    camera: &CameraModel,
    feet: Vec3,
    height_m: f64,
    pose: &JointAngles,
) -> Vec<Capsule> {
    // The pedestrian's left is the viewer's right.
    let (right, _) = camera.basis();
    let place = |p: [f64; 2]| -> Vec3 {
        [
            feet[0] + p[0] * right[0],
            feet[1] + p[1],
            feet[2] + p[0] * right[2],
        ]
    };
    body_plane_capsules(height_m, pose)
        .into_iter()
        .map(|(limb, a, b, radius)| Capsule { limb, a: place(a), b: place(b), radius })
        .collect()
}
