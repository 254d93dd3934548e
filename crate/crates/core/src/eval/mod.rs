//! Trial runner and evaluation: runs every scenario-gesture pair many
//! times, then derives confusion matrices, PR curves and summary tables.

pub mod metrics;
pub mod providers;
pub mod report;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    confusion_at, is_positive, macro_average, mean_rows, metrics, pr_sweep, ConfusionMatrix, MacroAverages, Metrics,
    PrCurve, PrPoint,
};
pub use providers::{builtin_server, provider_for, ModelProvider, OracleModels, RemoteModels, TemplateModels};
pub use report::{build_report, read_records, write_records, write_report, RecordsFile, ReportBundle, SgRow};

use crate::config::{ConfigError, RunConfig};
use crate::models::ModelError;
use crate::pipeline::{Pipeline, PipelineError, StepOutcome};
use crate::render::{trial_lighting, Pacing, RenderError, Renderer, Streamer};
use crate::scenario::{GestureClass, ScenarioError, ScenarioGesture, ScenarioId, World};
use crate::seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trial {trial} of {sg}: {source}")]
    PluginFailure { sg: ScenarioGesture, trial: u64, source: PipelineError },
    #[error("{0} is not an admissible scenario-gesture pair")]
    UnknownSg(ScenarioGesture),
    #[error("no positive trials for the target pair")]
    EmptyPositives,
    #[error("expected 14 rows, got {0}")]
    WrongRowCount(usize),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("model setup: {0}")]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io { path: path.to_owned(), source }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeFlags {
    /// A trigger with a full window passed without a decision.
    pub detector_miss: bool,
    /// The stream ended before any trigger had a full window.
    pub not_warm: bool,
}

/// The first decision of one trial. Trials without a decision record
/// NoGesture at confidence 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: ScenarioId,
    pub truth: GestureClass,
    pub trial_index: u64,
    pub predicted: GestureClass,
    pub confidence: f32,
    pub decision_frame: Option<u64>,
    pub outcome_flags: OutcomeFlags,
}

impl TrialRecord {
    pub fn sg(&self) -> ScenarioGesture {
        ScenarioGesture { scenario: self.scenario, gesture: self.truth }
    }
}

/// Execution options that do not affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    /// Writes the frames of trial 0 of every pair as PPM files here.
    pub dump_frames: Option<PathBuf>,
}

impl From<RenderError> for EvalError {
    fn from(e: RenderError) -> Self {
        EvalError::InvalidArgument(e.to_string())
    }
}

enum TrialFailure {
    Pipeline(PipelineError),
    Io(PathBuf, std::io::Error),
}

impl From<RenderError> for TrialFailure {
    fn from(e: RenderError) -> Self {
        TrialFailure::Pipeline(e.into())
    }
}

impl From<PipelineError> for TrialFailure {
    fn from(e: PipelineError) -> Self {
        TrialFailure::Pipeline(e)
    }
}

/// Runs one trial: streams frames into the pipeline until its first
/// decision or the end of the trial's frame budget.
pub fn run_trial(
    world: &World,
    config: &RunConfig,
    provider: &dyn ModelProvider,
    sg: ScenarioGesture,
    trial: u64,
    dump_dir: Option<&Path>,
) -> Result<TrialRecord, EvalError> {
    let fail = |source: PipelineError| EvalError::PluginFailure { sg, trial, source };
    let inst = world.build_scenario(sg.scenario, sg.gesture, config.master_seed, trial)?;
    let lighting = trial_lighting(&inst, config.variation.lighting_range);
    let renderer = Renderer::new(inst.clone(), inst.camera, lighting);
    let mut detector = provider.detector(&inst).map_err(|e| fail(PipelineError::Detector(e)))?;
    let mut classifier = provider.classifier(&inst).map_err(|e| fail(PipelineError::Classifier(e)))?;
    let rng = seed::stream(inst.trial_seed, seed::tag::TEMPORAL, 0);
    let mut pipeline = Pipeline::new(config.pipeline.clone(), detector.as_mut(), classifier.as_mut(), rng).map_err(fail)?;

    let pacing = if config.fast_forward { Pacing::FastForward } else { Pacing::RealTime };
    let streamer = Streamer::new(config.stream.clock(), pacing, config.pipeline.buffer_capacity());
    let window_m = config.pipeline.window_m;
    let mut decision = None;
    let mut warm_trigger = false;
    let streamed = streamer.run(&renderer, config.pipeline.frames_per_trial(), |buffer, frame| {
        if let Some(dir) = dump_dir {
            let path = dir.join(format!("frame_{:03}.ppm", frame.index));
            frame.save_ppm(&path).map_err(|e| TrialFailure::Io(path, e))?;
        }
        let outcome = pipeline.step(frame, buffer)?;
        if !matches!(outcome, StepOutcome::Skipped) && buffer.len() >= window_m {
            warm_trigger = true;
        }
        if let StepOutcome::Decision(d) = outcome {
            decision = Some(d);
            return Ok(true);
        }
        Ok(false)
    });
    match streamed {
        Ok(_) => {}
        Err(TrialFailure::Pipeline(e)) => return Err(fail(e)),
        Err(TrialFailure::Io(path, e)) => return Err(EvalError::Io { path, source: e }),
    }

    Ok(match decision {
        Some(d) => TrialRecord {
            scenario: sg.scenario,
            truth: sg.gesture,
            trial_index: trial,
            predicted: d.predicted,
            confidence: d.confidence,
            decision_frame: Some(d.frame_index),
            outcome_flags: OutcomeFlags::default(),
        },
        None => TrialRecord {
            scenario: sg.scenario,
            truth: sg.gesture,
            trial_index: trial,
            predicted: GestureClass::NoGesture,
            confidence: 0.0,
            decision_frame: None,
            outcome_flags: OutcomeFlags { detector_miss: warm_trigger, not_warm: !warm_trigger },
        },
    })
}

/// Runs `trials_per_sg` trials of every configured pair. Records come back
/// ordered by (scenario, gesture, trial) whatever the worker count.
pub fn run_trials(config: &RunConfig, provider: &dyn ModelProvider, opts: &RunOptions) -> Result<Vec<TrialRecord>, EvalError> {
    config.validate()?;
    let world = config.world()?;
    let jobs: Vec<(ScenarioGesture, u64)> = config
        .scenario_gestures()
        .into_iter()
        .flat_map(|sg| (0..config.trials_per_sg as u64).map(move |t| (sg, t)))
        .collect();
    if let Some(dir) = &opts.dump_frames {
        for sg in config.scenario_gestures() {
            let d = dir.join(format!("s{}_{}", sg.scenario.get(), sg.gesture.name()));
            std::fs::create_dir_all(&d).map_err(|e| EvalError::io(&d, e))?;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| EvalError::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(sg, t)| {
                let dump = opts
                    .dump_frames
                    .as_ref()
                    .filter(|_| t == 0)
                    .map(|d| d.join(format!("s{}_{}", sg.scenario.get(), sg.gesture.name())));
                run_trial(&world, config, provider, sg, t, dump.as_deref())
            })
            .collect()
    })
}
