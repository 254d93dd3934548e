//! Scenario world: the four car-pedestrian encounters, the five gestures,
//! and the camera geometry that places the pedestrian in frame.

pub mod camera;
pub mod skeleton;
pub mod track;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{project, CameraModel, Projection, Vec3};
pub use skeleton::{body_capsules, Capsule, Limb};
pub use track::{jittered_pose, GestureTrack, JointAngles, Keyframe};

use crate::seed;

pub const DEFAULT_JITTER_RAD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("gesture {gesture} is not performed in scenario {scenario}")]
    InadmissibleGesture { scenario: ScenarioId, gesture: GestureClass },
    #[error("scenario id {0} is outside 1..=4")]
    UnknownScenario(i64),
    #[error("unknown gesture name {0:?}")]
    UnknownGesture(String),
    #[error("invalid gesture track for {class}: {reason}")]
    InvalidTrack { class: GestureClass, reason: String },
    #[error("invalid scenario geometry: {0}")]
    InvalidGeometry(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureClass {
    GoForward,
    Stop,
    GoRight,
    GoLeft,
    NoGesture,
}

impl GestureClass {
    pub const ALL: [GestureClass; 5] = [
        GestureClass::GoForward,
        GestureClass::Stop,
        GestureClass::GoRight,
        GestureClass::GoLeft,
        GestureClass::NoGesture,
    ];

    /// Stable ordinal used for hashing, record ordering and config tables.
    pub const fn ordinal(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::GoForward => "go_forward",
            GestureClass::Stop => "stop",
            GestureClass::GoRight => "go_right",
            GestureClass::GoLeft => "go_left",
            GestureClass::NoGesture => "no_gesture",
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            GestureClass::GoRight => GestureClass::GoLeft,
            GestureClass::GoLeft => GestureClass::GoRight,
            g => g,
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GestureClass::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| ScenarioError::UnknownGesture(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct ScenarioId(u8);

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId(1), ScenarioId(2), ScenarioId(3), ScenarioId(4)];

    pub fn new(id: i64) -> Result<Self, ScenarioError> {
        if (1..=4).contains(&id) {
            Ok(ScenarioId(id as u8))
        } else {
            Err(ScenarioError::UnknownScenario(id))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Gestures the pedestrian performs in this scenario. Only the officer
    /// in scenario 1 directs turns.
    pub fn admitted_gestures(self) -> &'static [GestureClass] {
        use GestureClass::*;
        match self.0 {
            1 => &[GoForward, Stop, GoRight, GoLeft, NoGesture],
            _ => &[GoForward, Stop, NoGesture],
        }
    }

    pub fn admits(self, gesture: GestureClass) -> bool {
        self.admitted_gestures().contains(&gesture)
    }
}

impl TryFrom<i64> for ScenarioId {
    type Error = ScenarioError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        ScenarioId::new(v)
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        s.0
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the admissible (scenario, gesture) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScenarioGesture {
    pub scenario: ScenarioId,
    pub gesture: GestureClass,
}

impl ScenarioGesture {
    pub fn new(scenario: ScenarioId, gesture: GestureClass) -> Result<Self, ScenarioError> {
        if scenario.admits(gesture) {
            Ok(Self { scenario, gesture })
        } else {
            Err(ScenarioError::InadmissibleGesture { scenario, gesture })
        }
    }
}

impl fmt::Display for ScenarioGesture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.scenario, self.gesture)
    }
}

/// All admissible pairs in `(scenario, gesture ordinal)` order.
pub fn all_scenario_gestures() -> Vec<ScenarioGesture> {
    scenario_gestures(&ScenarioId::ALL)
}

pub fn scenario_gestures(scenarios: &[ScenarioId]) -> Vec<ScenarioGesture> {
    let mut ids = scenarios.to_vec();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .flat_map(|s| {
            s.admitted_gestures()
                .iter()
                .map(move |&g| ScenarioGesture { scenario: s, gesture: g })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianPlacement {
    pub position: Vec3,
    pub height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub id: ScenarioId,
    #[serde(default)]
    pub name: String,
    pub camera: CameraModel,
    pub pedestrian: PedestrianPlacement,
}

impl ScenarioGeometry {
    fn validate(&self) -> Result<(), ScenarioError> {
        if !self.camera.is_valid() {
            return Err(ScenarioError::InvalidGeometry(format!("scenario {}: invalid camera", self.id)));
        }
        if !(self.pedestrian.height_m > 0.0) {
            return Err(ScenarioError::InvalidGeometry(format!("scenario {}: pedestrian height", self.id)));
        }
        if self.camera.to_camera_frame(self.pedestrian.position)[2] <= 0.0 {
            return Err(ScenarioError::InvalidGeometry(format!(
                "scenario {}: pedestrian is not in front of the camera",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ScenarioFile {
    scenarios: Vec<ScenarioGeometry>,
}

/// A fully resolved trial world.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioInstance {
    pub scenario: ScenarioId,
    pub gesture: GestureClass,
    pub camera: CameraModel,
    pub pedestrian_position: Vec3,
    pub pedestrian_height_m: f64,
    pub track: GestureTrack,
    pub trial_seed: u64,
    pub jitter_amplitude_rad: f64,
}

impl ScenarioInstance {
    /// The jitter stream for one frame. Keyed by frame index so a pose can
    /// be recomputed in any order.
    pub fn jitter_rng(&self, frame_index: u64) -> rand_chacha::ChaCha8Rng {
        seed::stream(self.trial_seed, seed::tag::JITTER, frame_index)
    }

    /// The pose rendered at `frame_index`.
    pub fn pose(&self, frame_index: u64) -> JointAngles {
        pose_at(self, frame_index, &mut self.jitter_rng(frame_index))
    }

    pub fn capsules(&self, frame_index: u64) -> Vec<Capsule> {
        body_capsules(
            &self.camera,
            self.pedestrian_position,
            self.pedestrian_height_m,
            &self.pose(frame_index),
        )
    }

    pub fn sg(&self) -> ScenarioGesture {
        ScenarioGesture { scenario: self.scenario, gesture: self.gesture }
    }
}

/// Interpolated joint angles at `frame_index` with the instance's jitter
/// drawn from `rng`.
pub fn pose_at<R: Rng + ?Sized>(instance: &ScenarioInstance, frame_index: u64, rng: &mut R) -> JointAngles {
    jittered_pose(&instance.track, frame_index, instance.jitter_amplitude_rad, rng)
}

/// `H(master_seed, scenario, gesture, trial_index)`.
pub fn trial_seed(master_seed: u64, scenario: ScenarioId, gesture: GestureClass, trial_index: u64) -> u64 {
    seed::mix(master_seed, &[scenario.get() as u64, gesture.ordinal() as u64, trial_index])
}

/// Scenario geometry plus gesture tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    scenarios: BTreeMap<ScenarioId, ScenarioGeometry>,
    tracks: BTreeMap<GestureClass, GestureTrack>,
    pub jitter_amplitude_rad: f64,
}

const BUNDLED_SCENARIOS: &str = include_str!("../../data/scenarios.json");
const BUNDLED_TRACKS: [&str; 5] = [
    include_str!("../../data/gestures/go_forward.json"),
    include_str!("../../data/gestures/stop.json"),
    include_str!("../../data/gestures/go_right.json"),
    include_str!("../../data/gestures/go_left.json"),
    include_str!("../../data/gestures/no_gesture.json"),
];

impl World {
    /// The world shipped with the crate.
    pub fn bundled() -> &'static World {
        static WORLD: OnceLock<World> = OnceLock::new();
        WORLD.get_or_init(|| {
            let tracks = BUNDLED_TRACKS
                .iter()
                .map(|t| GestureTrack::from_json(t))
                .collect::<Result<Vec<_>, _>>()
                .expect("bundled gesture tracks");
            World::from_parts(BUNDLED_SCENARIOS, tracks).expect("bundled scenarios")
        })
    }

    pub fn from_parts(scenarios_json: &str, tracks: Vec<GestureTrack>) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            serde_json::from_str(scenarios_json).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut scenarios = BTreeMap::new();
        for g in file.scenarios {
            g.validate()?;
            scenarios.insert(g.id, g);
        }
        if let Some(missing) = ScenarioId::ALL.iter().find(|id| !scenarios.contains_key(id)) {
            return Err(ScenarioError::InvalidGeometry(format!("scenario {missing} missing")));
        }
        let mut by_class = BTreeMap::new();
        for t in tracks {
            by_class.insert(t.class, t);
        }
        if let Some(missing) = GestureClass::ALL.iter().find(|g| !by_class.contains_key(g)) {
            return Err(ScenarioError::InvalidTrack { class: *missing, reason: "track missing".into() });
        }
        Ok(Self { scenarios, tracks: by_class, jitter_amplitude_rad: DEFAULT_JITTER_RAD })
    }

    /// Loads `scenarios.json` and `gestures/*.json` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, ScenarioError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| ScenarioError::Io { path: p.display().to_string(), source })
        };
        let scenarios = read(&dir.join("scenarios.json"))?;
        let gdir = dir.join("gestures");
        let entries = std::fs::read_dir(&gdir)
            .map_err(|source| ScenarioError::Io { path: gdir.display().to_string(), source })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let tracks = paths
            .iter()
            .map(|p| read(p).and_then(|t| GestureTrack::from_json(&t)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_parts(&scenarios, tracks)
    }

    pub fn with_jitter(mut self, amplitude_rad: f64) -> Self {
        self.jitter_amplitude_rad = amplitude_rad.max(0.0);
        self
    }

    /// Overrides resolution and field of view of every scenario camera.
    pub fn with_camera_intrinsics(mut self, width_px: u32, height_px: u32, fov_deg: f64) -> Result<Self, ScenarioError> {
        for g in self.scenarios.values_mut() {
            g.camera.width_px = width_px;
            g.camera.height_px = height_px;
            g.camera.horizontal_fov_deg = fov_deg;
            g.validate()?;
        }
        Ok(self)
    }

    pub fn geometry(&self, id: ScenarioId) -> &ScenarioGeometry {
        &self.scenarios[&id]
    }

    pub fn track(&self, gesture: GestureClass) -> &GestureTrack {
        &self.tracks[&gesture]
    }

    pub fn build_scenario(
        &self,
        scenario: ScenarioId,
        gesture: GestureClass,
        master_seed: u64,
        trial_index: u64,
    ) -> Result<ScenarioInstance, ScenarioError> {
        if !scenario.admits(gesture) {
            return Err(ScenarioError::InadmissibleGesture { scenario, gesture });
        }
        let geo = self.geometry(scenario);
        Ok(ScenarioInstance {
            scenario,
            gesture,
            camera: geo.camera,
            pedestrian_position: geo.pedestrian.position,
            pedestrian_height_m: geo.pedestrian.height_m,
            track: self.track(gesture).clone(),
            trial_seed: trial_seed(master_seed, scenario, gesture, trial_index),
            jitter_amplitude_rad: self.jitter_amplitude_rad,
        })
    }
}

/// [`World::build_scenario`] on the bundled world.
pub fn build_scenario(
    scenario: ScenarioId,
    gesture: GestureClass,
    master_seed: u64,
    trial_index: u64,
) -> Result<ScenarioInstance, ScenarioError> {
    World::bundled().build_scenario(scenario, gesture, master_seed, trial_index)
}
