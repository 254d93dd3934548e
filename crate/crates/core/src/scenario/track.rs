use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GestureClass, ScenarioError};

/// Arm joint angles in radians.
///
/// Shoulders measure abduction from the hanging position within the body
/// plane; elbows measure additional bend of the forearm in the same
/// direction. `l*` is the pedestrian's left arm, which appears on the
/// viewer's right.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    pub ls: f64,
    pub le: f64,
    pub rs: f64,
    pub re: f64,
}

impl JointAngles {
    pub fn as_array(&self) -> [f64; 4] {
        [self.ls, self.le, self.rs, self.re]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { ls: a[0], le: a[1], rs: a[2], re: a[3] }
    }

    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let a = self.as_array();
        let b = other.as_array();
        Self::from_array(std::array::from_fn(|i| a[i] + (b[i] - a[i]) * t))
    }

    /// Horizontal mirror: left and right arms swap.
    pub fn mirrored(&self) -> Self {
        Self { ls: self.rs, le: self.re, rs: self.ls, re: self.le }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: u32,
    pub joints: JointAngles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrack")]
pub struct GestureTrack {
    pub class: GestureClass,
    pub duration_frames: u32,
    pub keyframes: Vec<Keyframe>,
}

#[derive(Deserialize)]
struct RawTrack {
    class: GestureClass,
    duration_frames: u32,
    keyframes: Vec<Keyframe>,
}

impl TryFrom<RawTrack> for GestureTrack {
    type Error = ScenarioError;

    fn try_from(raw: RawTrack) -> Result<Self, Self::Error> {
        GestureTrack::new(raw.class, raw.duration_frames, raw.keyframes)
    }
}

impl GestureTrack {
    pub fn new(
        class: GestureClass,
        duration_frames: u32,
        keyframes: Vec<Keyframe>,
    ) -> Result<Self, ScenarioError> {
        let bad = |why: &str| ScenarioError::InvalidTrack { class, reason: why.to_string() };
        if duration_frames == 0 {
            return Err(bad("duration_frames must be positive"));
        }
        let (first, last) = match (keyframes.first(), keyframes.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(bad("no keyframes")),
        };
        if first.frame != 0 {
            return Err(bad("first keyframe must be at frame 0"));
        }
        if last.frame != duration_frames - 1 {
            return Err(bad("last keyframe must be at duration_frames - 1"));
        }
        if keyframes.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return Err(bad("keyframes must be strictly ascending"));
        }
        if keyframes
            .iter()
            .any(|k| k.joints.as_array().iter().any(|a| !a.is_finite()))
        {
            return Err(bad("non-finite joint angle"));
        }
        if class == GestureClass::NoGesture && keyframes.iter().any(|k| k.joints != first.joints) {
            return Err(bad("no_gesture track must hold a single rest pose"));
        }
        Ok(Self { class, duration_frames, keyframes })
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    /// Keyframe interpolation without jitter. Frames past the end hold the
    /// last keyframe.
    pub fn interpolate(&self, frame_index: u64) -> JointAngles {
        let last = self.keyframes.last().expect("validated track");
        if frame_index >= last.frame as u64 {
            return last.joints;
        }
        // first.frame == 0, so some keyframe brackets frame_index
        let hi = self.keyframes.partition_point(|k| k.frame as u64 <= frame_index);
        let (a, b) = (&self.keyframes[hi - 1], &self.keyframes[hi]);
        let t = (frame_index - a.frame as u64) as f64 / (b.frame - a.frame) as f64;
        a.joints.lerp(&b.joints, t)
    }

    pub fn mirrored(&self) -> Self {
        Self {
            class: self.class.mirrored(),
            duration_frames: self.duration_frames,
            keyframes: self
                .keyframes
                .iter()
                .map(|k| Keyframe { frame: k.frame, joints: k.joints.mirrored() })
                .collect(),
        }
    }
}

/// Interpolated pose plus uniform per-joint jitter in `[-amplitude, amplitude]`.
///
/// Draws exactly four values from `rng` when `amplitude > 0` and none
/// otherwise.
pub fn jittered_pose<R: Rng + ?Sized>(
    track: &GestureTrack,
    frame_index: u64,
    amplitude: f64,
    rng: &mut R,
) -> JointAngles {
    let base = track.interpolate(frame_index);
    if amplitude <= 0.0 {
        return base;
    }
    let mut a = base.as_array();
    for v in &mut a {
        *v += rng.gen_range(-amplitude..=amplitude);
    }
    JointAngles::from_array(a)
}
