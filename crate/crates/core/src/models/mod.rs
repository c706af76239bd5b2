//! The six classifier families behind one trait.
//!
//! A [`ModelFamily`] trains from a [`DataView`] and predicts from the
//! [`ModelArtifact`] it produced. Families are looked up by name in a
//! [`ModelRegistry`], so the CLI and the benchmark harness select them at
//! runtime.

mod evolve;
mod forest;
mod gcn;
mod logreg;
mod mlp;
mod view;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::label::{Class, ClassWeights};
use crate::numerics::{AdamConfig, AdamState, DenseMatrix, NumericsError};

pub use evolve::{
    evolve_loss_and_grad, gru_backward, gru_forward, EvolveConfig, EvolveFamily, EvolveLayer, EvolveParams, GruCache,
    GruParams, StepInput,
};
pub use forest::{
    gini_impurity, split_gain, train_forest, DecisionTree, ForestConfig, ForestFamily, ForestParams, TreeNode,
};
pub use gcn::{extract_embeddings, gcn_forward, gcn_loss_and_grad, GcnConfig, GcnFamily, GcnForward, GcnParams};
pub use logreg::{logreg_loss_and_grad, LinearParams, LogRegConfig, LogRegFamily};
pub use mlp::{mlp_loss_and_grad, MlpConfig, MlpFamily, MlpParams};
pub use view::{AccessKind, AccessMonitor, DataView};

/// Bumped whenever the artifact layout changes incompatibly.
pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training mask selects no labelled nodes")]
    EmptyMask,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("artifact expects {expected} feature columns, input has {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("artifact family `{found}` where `{expected}` is required")]
    WrongFamily { expected: String, found: String },
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),
    #[error("step {step} is outside the data view {first}..={last}")]
    OutOfView { step: u32, first: u32, last: u32 },
    #[error("training diverged at epoch {0}: non-finite loss")]
    Diverged(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("artifact format: {0}")]
    Format(String),
}

/// Training settings for one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparameters {
    LogReg(LogRegConfig),
    Mlp(MlpConfig),
    Forest(ForestConfig),
    Gcn(GcnConfig),
    Evolve(EvolveConfig),
}

/// Flag-level overrides applied on top of a family's defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub l2: Option<f64>,
    pub hidden: Option<usize>,
    pub class_weights: Option<ClassWeights>,
    pub estimators: Option<usize>,
    pub max_features: Option<usize>,
    pub bootstrap: Option<bool>,
}

impl Hyperparameters {
    pub fn kind(&self) -> &'static str {
        match self {
            Hyperparameters::LogReg(_) => "log_reg",
            Hyperparameters::Mlp(_) => "mlp",
            Hyperparameters::Forest(_) => "forest",
            Hyperparameters::Gcn(_) => "gcn",
            Hyperparameters::Evolve(_) => "evolve",
        }
    }

    /// Applies every set override, rejecting ones the family has no use for.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ModelError> {
        let kind = self.kind();
        let reject = |flag: &str| ModelError::Config(format!("--{flag} does not apply to {kind} models"));
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        match self {
            Hyperparameters::LogReg(c) => {
                set!(c.epochs, o.epochs);
                set!(c.lr, o.lr);
                set!(c.l2, o.l2);
                set!(c.class_weights, o.class_weights);
                if o.hidden.is_some() {
                    return Err(reject("hidden"));
                }
            }
            Hyperparameters::Mlp(c) => {
                set!(c.epochs, o.epochs);
                set!(c.lr, o.lr);
                set!(c.l2, o.l2);
                set!(c.hidden, o.hidden);
                set!(c.class_weights, o.class_weights);
            }
            Hyperparameters::Gcn(c) => {
                set!(c.epochs, o.epochs);
                set!(c.lr, o.lr);
                set!(c.hidden, o.hidden);
                set!(c.class_weights, o.class_weights);
                if o.l2.is_some() {
                    return Err(reject("l2"));
                }
            }
            Hyperparameters::Evolve(c) => {
                set!(c.epochs, o.epochs);
                set!(c.lr, o.lr);
                set!(c.hidden, o.hidden);
                set!(c.class_weights, o.class_weights);
                if o.l2.is_some() {
                    return Err(reject("l2"));
                }
            }
            Hyperparameters::Forest(c) => {
                set!(c.estimators, o.estimators);
                set!(c.max_features, o.max_features);
                set!(c.bootstrap, o.bootstrap);
                set!(c.class_weights, o.class_weights);
                for (flag, set) in
                    [("epochs", o.epochs.is_some()), ("lr", o.lr.is_some()), ("l2", o.l2.is_some()), ("hidden", o.hidden.is_some())]
                {
                    if set {
                        return Err(reject(flag));
                    }
                }
            }
        }
        if !matches!(self, Hyperparameters::Forest(_)) {
            for (flag, set) in [
                ("estimators", o.estimators.is_some()),
                ("max-features", o.max_features.is_some()),
                ("bootstrap", o.bootstrap.is_some()),
            ] {
                if set {
                    return Err(reject(flag));
                }
            }
        }
        Ok(())
    }
}

/// Trained parameters of any family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearParams),
    Mlp(MlpParams),
    Forest(ForestParams),
    Gcn(GcnParams),
    Evolve(EvolveParams),
}

/// Everything needed to reproduce a trained model's predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    /// Registry name of the family that produced the artifact.
    pub family: String,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub feature_count: usize,
    /// Last step of the training view.
    pub trained_through: u32,
    /// Training loss per epoch; empty for forests.
    pub loss_trace: Vec<f64>,
    pub params: ModelParams,
}

/// Class probabilities `[licit, illicit]` for the listed nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub nodes: Vec<usize>,
    pub probs: DenseMatrix,
}

impl Prediction {
    /// Argmax per row with ties going to licit.
    pub fn classes(&self) -> Vec<Class> {
        (0..self.probs.rows()).map(|i| Class::from_probs(self.probs.row(i))).collect()
    }
}

impl ModelArtifact {
    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string(self).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn from_json(raw: &str) -> Result<Self, ModelError> {
        let artifact: ModelArtifact = serde_json::from_str(raw).map_err(|e| ModelError::Format(e.to_string()))?;
        if artifact.format_version != ARTIFACT_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "format version {} is not supported (expected {ARTIFACT_FORMAT_VERSION})",
                artifact.format_version
            )));
        }
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let io = |source| ModelError::Io { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        fs::write(path, self.to_json()?).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let raw = fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&raw)
    }

    /// Probabilities for every node in `view`, via the registered family.
    pub fn predict(&self, view: &DataView<'_>) -> Result<Prediction, ModelError> {
        if view.feature_count() != self.feature_count {
            return Err(ModelError::FeatureCount { expected: self.feature_count, found: view.feature_count() });
        }
        ModelRegistry::builtin().get(&self.family)?.predict(self, view)
    }
}

pub trait ModelFamily: Send + Sync {
    /// Canonical registry name.
    fn name(&self) -> &'static str;
    /// Row label used in report tables.
    fn display_name(&self) -> &'static str;
    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }
    /// Whether the family propagates over the graph.
    fn uses_graph(&self) -> bool {
        false
    }
    fn default_hyperparameters(&self) -> Hyperparameters;
    fn fit(&self, view: &DataView<'_>, hp: &Hyperparameters, seed: u64) -> Result<ModelArtifact, ModelError>;
    fn predict(&self, artifact: &ModelArtifact, view: &DataView<'_>) -> Result<Prediction, ModelError>;
}

/// Name → family lookup, aliases included.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    families: BTreeMap<&'static str, Arc<dyn ModelFamily>>,
    aliases: BTreeMap<&'static str, &'static str>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The registry holding all built-in families.
    pub fn builtin() -> &'static ModelRegistry {
        static REGISTRY: OnceLock<ModelRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            let mut r = ModelRegistry::new();
            r.register(Arc::new(LogRegFamily));
            r.register(Arc::new(MlpFamily));
            r.register(Arc::new(ForestFamily));
            r.register(Arc::new(GcnFamily { skip: false }));
            r.register(Arc::new(GcnFamily { skip: true }));
            r.register(Arc::new(EvolveFamily));
            r
        })
    }

    pub fn register(&mut self, family: Arc<dyn ModelFamily>) {
        for &alias in family.aliases() {
            self.aliases.insert(alias, family.name());
        }
        self.families.insert(family.name(), family);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ModelFamily, ModelError> {
        let lower = name.to_ascii_lowercase();
        let key = self.aliases.get(lower.as_str()).copied().unwrap_or(lower.as_str());
        self.families.get(key).map(|f| f.as_ref()).ok_or_else(|| ModelError::UnknownFamily(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.keys().copied().collect()
    }
}

pub(crate) fn expect_params<'a, T>(
    artifact: &'a ModelArtifact,
    family: &str,
    pick: impl Fn(&'a ModelParams) -> Option<&'a T>,
) -> Result<&'a T, ModelError> {
    pick(&artifact.params)
        .ok_or_else(|| ModelError::WrongFamily { expected: family.to_string(), found: artifact.family.clone() })
}

/// Labelled training rows of a view, checked to contain both classes.
pub(crate) fn training_rows(view: &DataView<'_>) -> Result<(Vec<usize>, Vec<Option<Class>>), ModelError> {
    let nodes = view.labelled_nodes()?;
    if nodes.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    let targets = view.labels_of(&nodes)?;
    let illicit = targets.iter().filter(|t| **t == Some(Class::Illicit)).count();
    if illicit == 0 || illicit == targets.len() {
        return Err(ModelError::SingleClass);
    }
    Ok((nodes, targets))
}

/// Full-batch Adam. Records the loss at the parameters each update starts
/// from, so the trace has one entry per epoch.
pub(crate) fn adam_train(
    params: &mut [DenseMatrix],
    epochs: usize,
    lr: f64,
    mut loss_and_grad: impl FnMut(&[DenseMatrix]) -> Result<(f64, Vec<DenseMatrix>), ModelError>,
) -> Result<Vec<f64>, ModelError> {
    let mut adam = AdamState::new(AdamConfig::with_lr(lr), params);
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = loss_and_grad(params)?;
        if !loss.is_finite() {
            return Err(ModelError::Diverged(epoch));
        }
        trace.push(loss);
        adam.step(params, &grads)?;
    }
    Ok(trace)
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Config(format!("{name} must be positive, got {value}")))
    }
}
