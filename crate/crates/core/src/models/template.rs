//! Trajectory-matching gesture classifier.
//!
//! A clip is reduced to the per-frame centroid of foreground pixels in the
//! upper half of the crop. Each gesture is scored by `exp(-alpha * d)`,
//! where `d` is the smallest RMS distance between that trajectory and any
//! aligned stretch of one of the gesture's templates.

use super::{Classifier, ClassScores, ModelError, NUM_CLASSES, FLOOR};
use crate::frame::Frame;
use crate::pipeline::{locate, prepare_gc_input, ClassMap, Clip, Located, PipelineConfig, PipelineError};
use crate::render::Renderer;
use crate::scenario::{all_scenario_gestures, GestureClass, ScenarioError, ScenarioGesture, World};

use super::reference::ReferenceDetector;

pub const DEFAULT_ALPHA: f64 = 8.0;

/// Whether a pixel is foreground: red channel above twice the others.
/// Holds under any uniform brightness scale of the figure's color.
#[inline]
pub fn is_foreground(p: &[u8]) -> bool {
    p[0] as u32 > 2 * (p[1].max(p[2]) as u32)
}

/// Normalized centroid of upper-half foreground pixels, or `None` when the
/// upper half holds no foreground.
pub fn frame_feature(frame: &Frame) -> Option<[f64; 2]> {
    let (w, h) = (frame.width as usize, frame.height as usize);
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for y in 0..h / 2 {
        let row = &frame.pixels[y * w * 3..(y + 1) * w * 3];
        for (x, p) in row.chunks_exact(3).enumerate() {
            if is_foreground(p) {
                sx += 2 * x as u64 + 1;
                sy += 2 * y as u64 + 1;
                n += 1;
            }
        }
    }
    (n > 0).then(|| [sx as f64 / (2 * n * w as u64) as f64, sy as f64 / (2 * n * h as u64) as f64])
}

/// Feature trajectory of a clip. Frames without foreground take the value
/// of the nearest earlier frame that has one, or failing that the nearest
/// later one.
pub fn clip_features(clip: &Clip) -> Result<Vec<[f64; 2]>, ModelError> {
    let raw: Vec<_> = clip.frames.iter().map(frame_feature).collect();
    let first = raw.iter().flatten().next().copied().ok_or(ModelError::EmptyClip)?;
    let mut last = first;
    Ok(raw
        .into_iter()
        .map(|f| {
            if let Some(v) = f {
                last = v;
            }
            last
        })
        .collect())
}

/// Smallest RMS distance over all alignments of the shorter trajectory
/// inside the longer one.
pub fn trajectory_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return f64::INFINITY;
    }
    (0..=long.len() - short.len())
        .map(|o| {
            let ss: f64 = short
                .iter()
                .zip(&long[o..])
                .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                .sum();
            (ss / short.len() as f64).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub sg: ScenarioGesture,
    pub trajectory: Vec<[f64; 2]>,
}

/// Reference trajectories, one per scenario-gesture.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBank {
    pub templates: Vec<Template>,
    pub alpha: f64,
    pub class_map: ClassMap,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateBuildError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no pedestrian found in the clean render of {0}")]
    NotFound(ScenarioGesture),
}

impl TemplateBank {
    /// Extracts templates from clean renders (no jitter, unit lighting)
    /// passed through the reference detector and the classifier-side
    /// transforms, using the window of the first warm trigger.
    pub fn build(world: &World, config: &PipelineConfig) -> Result<Self, TemplateBuildError> {
        let world = world.clone().with_jitter(0.0);
        let trigger = config.first_warm_trigger();
        let first = trigger + 1 - config.window_m as u64;
        let mut templates = Vec::new();
        for sg in all_scenario_gestures() {
            let inst = world.build_scenario(sg.scenario, sg.gesture, 0, 0)?;
            let renderer = Renderer::new(inst.clone(), inst.camera, 1.0);
            let mut detector = ReferenceDetector::for_camera(&inst.camera, config.pd_scale);
            let crop = match locate(&renderer.render(trigger), &mut detector, config)? {
                Located::Found { crop, .. } => crop,
                _ => return Err(TemplateBuildError::NotFound(sg)),
            };
            let window: Vec<Frame> = (first..=trigger).map(|i| renderer.render(i)).collect();
            let clip = prepare_gc_input(&window, crop, config.gc_input_px)?;
            templates.push(Template { sg, trajectory: clip_features(&clip)? });
        }
        Ok(Self { templates, alpha: DEFAULT_ALPHA, class_map: config.class_map })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Unfloored score per gesture, in [`GestureClass::ALL`] order.
    pub fn gesture_scores(&self, features: &[[f64; 2]]) -> [f64; 5] {
        let mut out = [0.0f64; 5];
        for t in &self.templates {
            let s = (-self.alpha * trajectory_distance(features, &t.trajectory)).exp();
            let slot = &mut out[t.sg.gesture.ordinal()];
            *slot = (*slot).max(s);
        }
        out
    }
}

fn place(scores: [f64; 5], class_map: &ClassMap) -> ClassScores {
    let mut out = [FLOOR; NUM_CLASSES];
    for g in GestureClass::ALL {
        out[class_map.index(g)] = scores[g.ordinal()] as f32;
    }
    ClassScores::from_array(out).expect("scores lie in [0, 1]")
}

/// Scores a clip against the bank. Fails with [`ModelError::EmptyClip`]
/// when no frame has foreground.
pub fn template_classify(clip: &Clip, templates: &TemplateBank) -> Result<ClassScores, ModelError> {
    let f = clip_features(clip)?;
    Ok(place(templates.gesture_scores(&f), &templates.class_map))
}

/// Plugin wrapper around [`template_classify`]. A clip with no foreground
/// yields full confidence in NoGesture.
#[derive(Debug, Clone)]
pub struct TemplateClassifier {
    bank: std::sync::Arc<TemplateBank>,
}

impl TemplateClassifier {
    pub fn new(bank: std::sync::Arc<TemplateBank>) -> Self {
        Self { bank }
    }
}

impl Classifier for TemplateClassifier {
    fn classify(&mut self, clip: &Clip) -> Result<ClassScores, ModelError> {
        match template_classify(clip, &self.bank) {
            Err(ModelError::EmptyClip) => {
                let mut s = [0.0; 5];
                s[GestureClass::NoGesture.ordinal()] = 1.0;
                Ok(place(s, &self.bank.class_map))
            }
            r => r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_uses_pixel_centers() {
        let mut f = Frame::filled(0, 4, 4, [0, 0, 0]);
        f.set_pixel(0, 0, [200, 40, 40]);
        f.set_pixel(3, 1, [200, 40, 40]);
        f.set_pixel(2, 3, [200, 40, 40]);
        let c = frame_feature(&f).unwrap();
        assert_eq!(c, [(0.5 + 3.5) / 2.0 / 4.0, (0.5 + 1.5) / 2.0 / 4.0]);
        assert_eq!(frame_feature(&f.mirrored()).unwrap(), [1.0 - c[0], c[1]]);
    }

    #[test]
    fn gaps_are_filled_from_neighbours() {
        let empty = Frame::filled(0, 4, 4, [0, 0, 0]);
        let mut lit = empty.clone();
        lit.set_pixel(1, 1, [255, 0, 0]);
        let clip = Clip::new(vec![empty.clone(), lit.clone(), empty.clone()]);
        let f = clip_features(&clip).unwrap();
        assert_eq!(f, vec![f[1]; 3]);
        assert_eq!(clip_features(&Clip::new(vec![empty])), Err(ModelError::EmptyClip));
    }

    #[test]
    fn distance_slides_shorter_over_longer() {
        let long: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 0.0]).collect();
        assert_eq!(trajectory_distance(&long[3..7], &long), 0.0);
        assert_eq!(trajectory_distance(&long, &long[3..7]), 0.0);
        let shifted: Vec<[f64; 2]> = long.iter().map(|p| [p[0], 0.5]).collect();
        assert!((trajectory_distance(&shifted, &long) - 0.5).abs() < 1e-12);
    }
}
