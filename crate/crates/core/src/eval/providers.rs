//! Sources of per-trial detector and classifier instances.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::EvalError;
use crate::config::{BuiltinModel, ModelSource, RunConfig};
use crate::frame::{BBox, Frame};
use crate::models::{
    AdaptiveReferenceDetector, ClassScores, Classifier, PluginServer, Detector, GroundTruthDetector, ModelError, NoisyOracleConfig, OracleClassifier,
    ReferenceDetector, RemoteClassifier, RemoteDetector, TemplateBank, TemplateClassifier,
};
use crate::pipeline::{ClassMap, Clip};
use crate::scenario::{ScenarioId, ScenarioInstance, World};
use crate::seed;

/// Hands out fresh plugin instances for each trial. Shared across workers.
pub trait ModelProvider: Sync {
    fn detector(&self, instance: &ScenarioInstance) -> Result<Box<dyn Detector + '_>, ModelError>;
    fn classifier(&self, instance: &ScenarioInstance) -> Result<Box<dyn Classifier + '_>, ModelError>;
}

/// Reference detector and template classifier.
pub struct TemplateModels {
    detectors: BTreeMap<ScenarioId, ReferenceDetector>,
    bank: Arc<TemplateBank>,
}

impl TemplateModels {
    pub fn new(world: &World, config: &RunConfig) -> Result<Self, EvalError> {
        let bank = TemplateBank::build(world, &config.pipeline)
            .map_err(|e| EvalError::InvalidArgument(format!("template extraction failed: {e}")))?;
        Ok(Self::with_bank(world, config, Arc::new(bank)))
    }

    pub fn with_bank(world: &World, config: &RunConfig, bank: Arc<TemplateBank>) -> Self {
        let detectors = ScenarioId::ALL
            .iter()
            .map(|&id| (id, ReferenceDetector::for_camera(&world.geometry(id).camera, config.pipeline.pd_scale)))
            .collect();
        Self { detectors, bank }
    }

    pub fn bank(&self) -> &Arc<TemplateBank> {
        &self.bank
    }
}

impl ModelProvider for TemplateModels {
    fn detector(&self, instance: &ScenarioInstance) -> Result<Box<dyn Detector + '_>, ModelError> {
        Ok(Box::new(self.detectors[&instance.scenario].clone()))
    }

    fn classifier(&self, _: &ScenarioInstance) -> Result<Box<dyn Classifier + '_>, ModelError> {
        Ok(Box::new(TemplateClassifier::new(self.bank.clone())))
    }
}

/// Ground-truth detector and noisy oracle classifier.
pub struct OracleModels {
    cfg: Arc<NoisyOracleConfig>,
    class_map: ClassMap,
}

impl OracleModels {
    pub fn new(cfg: NoisyOracleConfig, class_map: ClassMap) -> Self {
        Self { cfg: Arc::new(cfg), class_map }
    }
}

impl ModelProvider for OracleModels {
    fn detector(&self, instance: &ScenarioInstance) -> Result<Box<dyn Detector + '_>, ModelError> {
        Ok(Box::new(GroundTruthDetector::new(instance.clone())))
    }

    fn classifier(&self, instance: &ScenarioInstance) -> Result<Box<dyn Classifier + '_>, ModelError> {
        let rng = seed::stream(instance.trial_seed, seed::tag::ORACLE, 0);
        Ok(Box::new(OracleClassifier::new(instance.gesture, self.cfg.clone(), self.class_map, rng)))
    }
}

/// Plugins served over the wire protocol. Connections are pooled and reused
/// across trials; a connection that failed is dropped.
pub struct RemoteModels {
    addr: String,
    detectors: Mutex<Vec<RemoteDetector>>,
    classifiers: Mutex<Vec<RemoteClassifier>>,
}

impl RemoteModels {
    pub fn new(addr: impl Into<String>) -> Self {
        Self { addr: addr.into(), detectors: Mutex::default(), classifiers: Mutex::default() }
    }
}

struct Pooled<'a, T> {
    item: Option<T>,
    pool: &'a Mutex<Vec<T>>,
}

impl<T> Pooled<'_, T> {
    fn track<R>(&mut self, r: Result<R, ModelError>) -> Result<R, ModelError> {
        if r.is_err() {
            self.item = None;
        }
        r
    }

    fn get(&mut self) -> Result<&mut T, ModelError> {
        self.item.as_mut().ok_or_else(|| ModelError::Io("connection was dropped after an error".into()))
    }
}

impl<T> Drop for Pooled<'_, T> {
    fn drop(&mut self) {
        if let Some(item) = self.item.take() {
            self.pool.lock().unwrap().push(item);
        }
    }
}

impl Detector for Pooled<'_, RemoteDetector> {
    fn detect(&mut self, frame: &Frame) -> Result<Vec<BBox>, ModelError> {
        let r = self.get()?.detect(frame);
        self.track(r)
    }
}

impl Classifier for Pooled<'_, RemoteClassifier> {
    fn classify(&mut self, clip: &Clip) -> Result<ClassScores, ModelError> {
        let r = self.get()?.classify(clip);
        self.track(r)
    }
}

impl ModelProvider for RemoteModels {
    fn detector(&self, _: &ScenarioInstance) -> Result<Box<dyn Detector + '_>, ModelError> {
        let item = match self.detectors.lock().unwrap().pop() {
            Some(d) => d,
            None => RemoteDetector::connect(&self.addr)?,
        };
        Ok(Box::new(Pooled { item: Some(item), pool: &self.detectors }))
    }

    fn classifier(&self, _: &ScenarioInstance) -> Result<Box<dyn Classifier + '_>, ModelError> {
        let item = match self.classifiers.lock().unwrap().pop() {
            Some(c) => c,
            None => RemoteClassifier::connect(&self.addr)?,
        };
        Ok(Box::new(Pooled { item: Some(item), pool: &self.classifiers }))
    }
}

/// A server hosting the reference detector and the template classifier
/// built for `config`'s world and pipeline.
pub fn builtin_server(config: &RunConfig) -> Result<PluginServer, EvalError> {
    let world = config.world()?;
    let bank = Arc::new(
        TemplateBank::build(&world, &config.pipeline)
            .map_err(|e| EvalError::InvalidArgument(format!("template extraction failed: {e}")))?,
    );
    let camera = world.geometry(ScenarioId::ALL[0]).camera;
    let pd_scale = config.pipeline.pd_scale;
    Ok(PluginServer::new(
        move || Box::new(AdaptiveReferenceDetector::new(camera, pd_scale)) as Box<dyn Detector>,
        move || Box::new(TemplateClassifier::new(bank.clone())) as Box<dyn Classifier>,
        config.pipeline.sample_t,
    ))
}

/// The provider named by `config.model`.
pub fn provider_for(config: &RunConfig) -> Result<Box<dyn ModelProvider>, EvalError> {
    Ok(match &config.model {
        ModelSource::Builtin(BuiltinModel::Template) => Box::new(TemplateModels::new(&config.world()?, config)?),
        ModelSource::Builtin(BuiltinModel::Oracle) => {
            Box::new(OracleModels::new(config.oracle_config(), config.pipeline.class_map))
        }
        ModelSource::Remote(addr) => Box::new(RemoteModels::new(addr.clone())),
    })
}
