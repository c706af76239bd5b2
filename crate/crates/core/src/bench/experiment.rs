//! Split → assemble features → train → predict → metrics.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::{assemble, FeatureSet};
use crate::graph::TemporalGraph;
use crate::label::Class;
use crate::models::{
    extract_embeddings, AccessMonitor, DataView, Hyperparameters, ModelArtifact, ModelError, ModelParams, ModelRegistry,
    Prediction,
};
use crate::numerics::DenseMatrix;

use super::metrics::{compute_metrics, per_timestep_f1, MetricsReport, StepF1};
use super::{BenchError, SplitSpec};

/// Input columns of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    #[serde(rename = "LF")]
    Lf,
    #[serde(rename = "AF")]
    Af,
    #[serde(rename = "LF+NE")]
    LfNe,
    #[serde(rename = "AF+NE")]
    AfNe,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 4] = [FeatureMode::Lf, FeatureMode::Af, FeatureMode::LfNe, FeatureMode::AfNe];

    pub fn base(self) -> FeatureSet {
        match self {
            FeatureMode::Lf | FeatureMode::LfNe => FeatureSet::Local,
            FeatureMode::Af | FeatureMode::AfNe => FeatureSet::All,
        }
    }

    pub fn with_embeddings(self) -> bool {
        matches!(self, FeatureMode::LfNe | FeatureMode::AfNe)
    }

    pub fn tag(self) -> &'static str {
        match self {
            FeatureMode::Lf => "LF",
            FeatureMode::Af => "AF",
            FeatureMode::LfNe => "LF+NE",
            FeatureMode::AfNe => "AF+NE",
        }
    }

    /// File-name friendly form.
    pub fn slug(self) -> &'static str {
        match self {
            FeatureMode::Lf => "lf",
            FeatureMode::Af => "af",
            FeatureMode::LfNe => "lf-ne",
            FeatureMode::AfNe => "af-ne",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "+").as_str() {
            "lf" => Ok(FeatureMode::Lf),
            "af" => Ok(FeatureMode::Af),
            "lf+ne" => Ok(FeatureMode::LfNe),
            "af+ne" => Ok(FeatureMode::AfNe),
            _ => Err(format!("unknown feature mode `{s}` (expected lf, af, lf+ne or af+ne)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Registry name of the evaluated family.
    pub model: String,
    pub hyperparameters: Hyperparameters,
    pub features: FeatureMode,
    pub split: SplitSpec,
    pub seed: u64,
    pub retrain_per_step: bool,
    /// Family supplying embeddings in the `+NE` modes.
    pub embedding_model: String,
    pub embedding_hyperparameters: Hyperparameters,
}

impl ExperimentConfig {
    /// Family defaults, boundary 34, seed 0, GCN embeddings.
    pub fn new(model: &str, features: FeatureMode) -> Result<Self, BenchError> {
        let registry = ModelRegistry::builtin();
        let family = registry.get(model)?;
        let embedder = registry.get("gcn")?;
        Ok(Self {
            model: family.name().to_string(),
            hyperparameters: family.default_hyperparameters(),
            features,
            split: SplitSpec::default(),
            seed: 0,
            retrain_per_step: false,
            embedding_model: embedder.name().to_string(),
            embedding_hyperparameters: embedder.default_hyperparameters(),
        })
    }
}

/// `{model}-{features}-b{boundary}-s{seed}`, with `-retrain` appended for
/// per-step retraining.
pub fn experiment_id(config: &ExperimentConfig) -> String {
    let mut id = format!("{}-{}-b{}-s{}", config.model, config.features.slug(), config.split.boundary, config.seed);
    if config.retrain_per_step {
        id.push_str("-retrain");
    }
    id
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub illicit_precision: f64,
    pub illicit_recall: f64,
    pub illicit_f1: f64,
    pub micro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProvenance {
    pub model: String,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub width: usize,
}

/// Labelled training rows available when predicting `time_step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSize {
    pub time_step: u32,
    pub labelled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub row: ReportRow,
    pub config: ExperimentConfig,
    pub embedding: Option<EmbeddingProvenance>,
    pub train_sizes: Vec<TrainSize>,
    pub metrics: MetricsReport,
    pub series: Vec<StepF1>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    /// The evaluated model; for per-step retraining, the last one trained.
    pub artifact: ModelArtifact,
    pub embedding_artifact: Option<ModelArtifact>,
}

struct Fitted {
    prediction: Prediction,
    artifact: ModelArtifact,
    embedding: Option<ModelArtifact>,
    train_labelled: usize,
}

fn monitored<'a>(view: DataView<'a>, monitor: Option<&'a AccessMonitor>) -> DataView<'a> {
    match monitor {
        Some(m) => view.with_monitor(m),
        None => view,
    }
}

/// Scatters rows given in `nodes` order back into node-index order.
fn scatter(nodes: &[usize], rows: &DenseMatrix, n: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n, rows.cols());
    for (k, &i) in nodes.iter().enumerate() {
        out.row_mut(i).copy_from_slice(rows.row(k));
    }
    out
}

/// `base` with the hidden activations of `embedder` appended, rows in
/// node-index order.
fn with_embeddings(graph: &TemporalGraph, base: &DenseMatrix, embedder: &ModelArtifact) -> Result<DenseMatrix, BenchError> {
    let (nodes, h1) = extract_embeddings(embedder, &DataView::full(graph, base)?)?;
    Ok(base.hcat(&scatter(&nodes, &h1, graph.node_count())).map_err(ModelError::from)?)
}

/// Rebuilds the input matrix an artifact was trained on: the local or full
/// feature block, plus embeddings from `embedder` for `+NE` artifacts.
pub fn inputs_for(
    graph: &TemporalGraph,
    artifact: &ModelArtifact,
    embedder: Option<&ModelArtifact>,
) -> Result<DenseMatrix, BenchError> {
    let width = match embedder.map(|e| &e.params) {
        None => 0,
        Some(ModelParams::Gcn(p)) => p.w0.cols(),
        Some(_) => {
            return Err(ModelError::WrongFamily { expected: "gcn".into(), found: embedder.unwrap().family.clone() }.into())
        }
    };
    let nodes = graph.nodes();
    let set = [FeatureSet::Local, FeatureSet::All]
        .into_iter()
        .find(|s| {
            let base = if *s == FeatureSet::Local { nodes.local_count() } else { nodes.total_count() };
            base + width == artifact.feature_count
        })
        .ok_or_else(|| BenchError::Config(format!(
            "artifact expects {} inputs; the graph offers {} local or {} total columns{}",
            artifact.feature_count,
            nodes.local_count(),
            nodes.total_count(),
            if width > 0 { format!(" plus {width} embedding columns") } else { String::new() }
        )))?;
    let base = assemble(nodes, set, None)?.values().clone();
    match embedder {
        Some(e) => with_embeddings(graph, &base, e),
        None => Ok(base),
    }
}

fn fit_predict(
    graph: &TemporalGraph,
    config: &ExperimentConfig,
    base: &DenseMatrix,
    last_train: u32,
    test: RangeInclusive<u32>,
    monitor: Option<&AccessMonitor>,
) -> Result<Fitted, BenchError> {
    let registry = ModelRegistry::builtin();
    let (x, embedding) = if config.features.with_embeddings() {
        let embedder = registry.get(&config.embedding_model)?;
        let train = monitored(DataView::new(graph, base, 1..=last_train)?, monitor);
        let art = embedder.fit(&train, &config.embedding_hyperparameters, config.seed)?;
        let x = with_embeddings(graph, base, &art)?;
        (x, Some(art))
    } else {
        (base.clone(), None)
    };
    let family = registry.get(&config.model)?;
    let train = monitored(DataView::new(graph, &x, 1..=last_train)?, monitor);
    let train_labelled = DataView::new(graph, &x, 1..=last_train)?.labelled_nodes()?.len();
    let artifact = family.fit(&train, &config.hyperparameters, config.seed)?;
    let prediction = artifact.predict(&DataView::new(graph, &x, test)?)?;
    Ok(Fitted { prediction, artifact, embedding, train_labelled })
}

/// Labelled subset of a prediction: `(predicted, truth, step)` per node.
fn evaluate(graph: &TemporalGraph, prediction: &Prediction) -> (Vec<Class>, Vec<Class>, Vec<u32>) {
    let classes = prediction.classes();
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for (k, &i) in prediction.nodes.iter().enumerate() {
        if let Some(truth) = graph.label(i).class() {
            out.0.push(classes[k]);
            out.1.push(truth);
            out.2.push(graph.time_step(i));
        }
    }
    out
}

fn finish(
    graph: &TemporalGraph,
    config: &ExperimentConfig,
    predicted: Vec<Class>,
    truth: Vec<Class>,
    steps: Vec<u32>,
    train_sizes: Vec<TrainSize>,
    last: Fitted,
) -> Result<ExperimentOutcome, BenchError> {
    let metrics = compute_metrics(&predicted, &truth)?;
    let series = per_timestep_f1(&predicted, &truth, &steps, config.split.boundary + 1..=graph.max_step())?;
    let family = ModelRegistry::builtin().get(&config.model)?;
    let row = ReportRow {
        method: format!("{}^{}", family.display_name(), config.features.tag()),
        illicit_precision: metrics.illicit.precision,
        illicit_recall: metrics.illicit.recall,
        illicit_f1: metrics.illicit.f1,
        micro_f1: metrics.micro_f1,
    };
    let embedding = last.embedding.as_ref().map(|e| EmbeddingProvenance {
        model: e.family.clone(),
        hyperparameters: e.hyperparameters.clone(),
        seed: e.seed,
        width: match &e.params {
            ModelParams::Gcn(p) => p.w0.cols(),
            _ => 0,
        },
    });
    Ok(ExperimentOutcome {
        report: ExperimentReport {
            id: experiment_id(config),
            row,
            config: config.clone(),
            embedding,
            train_sizes,
            metrics,
            series,
        },
        artifact: last.artifact,
        embedding_artifact: last.embedding,
    })
}

/// Trains once on the steps up to the boundary and evaluates on the rest.
/// With a monitor, every read made while training is counted.
pub fn run_experiment(
    graph: &TemporalGraph,
    config: &ExperimentConfig,
    monitor: Option<&AccessMonitor>,
) -> Result<ExperimentOutcome, BenchError> {
    if config.retrain_per_step {
        return retrain_per_step(graph, config);
    }
    config.split.validate(graph)?;
    let base = assemble(graph.nodes(), config.features.base(), None)?.values().clone();
    let b = config.split.boundary;
    let fitted = fit_predict(graph, config, &base, b, b + 1..=graph.max_step(), monitor)?;
    let (p, t, s) = evaluate(graph, &fitted.prediction);
    let sizes = vec![TrainSize { time_step: b + 1, labelled: fitted.train_labelled }];
    finish(graph, config, p, t, s, sizes, fitted)
}

/// For each test step `t`, trains on every step before `t` and evaluates
/// on `t` alone. Metrics pool all test steps.
pub fn retrain_per_step(graph: &TemporalGraph, config: &ExperimentConfig) -> Result<ExperimentOutcome, BenchError> {
    config.split.validate(graph)?;
    let base = assemble(graph.nodes(), config.features.base(), None)?.values().clone();
    let (mut predicted, mut truth, mut steps, mut sizes) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut last = None;
    for t in config.split.boundary + 1..=graph.max_step() {
        let fitted = fit_predict(graph, config, &base, t - 1, t..=t, None)?;
        let (p, y, s) = evaluate(graph, &fitted.prediction);
        predicted.extend(p);
        truth.extend(y);
        steps.extend(s);
        sizes.push(TrainSize { time_step: t, labelled: fitted.train_labelled });
        last = Some(fitted);
    }
    let last = last.expect("validated split leaves at least one test step");
    finish(graph, config, predicted, truth, steps, sizes, last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synth::{generate, SyntheticConfig};
    use crate::models::{AccessKind, Overrides};

    fn small(model: &str, features: FeatureMode) -> (TemporalGraph, ExperimentConfig) {
        let g = generate(&SyntheticConfig { steps: 6, min_nodes: 30, max_nodes: 50, ..Default::default() }).unwrap();
        let mut cfg = ExperimentConfig::new(model, features).unwrap();
        cfg.split = SplitSpec { boundary: 4 };
        let _ = cfg.hyperparameters.apply(&Overrides { epochs: Some(20), ..Default::default() });
        cfg.embedding_hyperparameters.apply(&Overrides { epochs: Some(20), hidden: Some(8), ..Default::default() }).unwrap();
        (g, cfg)
    }

    #[test]
    fn feature_mode_parsing() {
        for m in FeatureMode::ALL {
            assert_eq!(m.tag().parse::<FeatureMode>().unwrap(), m);
            assert_eq!(m.slug().parse::<FeatureMode>().unwrap(), m);
        }
        assert!("xf".parse::<FeatureMode>().is_err());
    }

    #[test]
    fn ids_and_method_names() {
        let (g, mut cfg) = small("logreg", FeatureMode::AfNe);
        assert_eq!(experiment_id(&cfg), "logreg-af-ne-b4-s0");
        let out = run_experiment(&g, &cfg, None).unwrap();
        assert_eq!(out.report.row.method, "Logistic Regr^AF+NE");
        let emb = out.report.embedding.as_ref().unwrap();
        assert_eq!((emb.model.as_str(), emb.seed, emb.width), ("gcn", 0, 8));
        assert_eq!(out.report.series.len(), 2);
        cfg.retrain_per_step = true;
        assert_eq!(experiment_id(&cfg), "logreg-af-ne-b4-s0-retrain");
    }

    #[test]
    fn training_reads_stay_before_boundary() {
        let (g, cfg) = small("gcn", FeatureMode::LfNe);
        let monitor = AccessMonitor::new(g.max_step());
        run_experiment(&g, &cfg, Some(&monitor)).unwrap();
        assert_eq!(monitor.reads_after(4), 0);
        assert!(monitor.reads(4, AccessKind::Labels) > 0);
    }

    #[test]
    fn retraining_grows_the_training_set() {
        let (g, mut cfg) = small("logreg", FeatureMode::Lf);
        cfg.retrain_per_step = true;
        let out = run_experiment(&g, &cfg, None).unwrap();
        let sizes: Vec<usize> = out.report.train_sizes.iter().map(|s| s.labelled).collect();
        assert_eq!(sizes.len(), 2);
        assert!(sizes[0] < sizes[1]);
    }
}
