//! Temporal evaluation: train on the steps up to a boundary, test on the
//! rest, and emit per-class metrics, per-step series and report files.

mod experiment;
mod metrics;
mod report;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::features::FeatureError;
use crate::graph::{GraphError, TemporalGraph};
use crate::models::ModelError;

pub use experiment::{
    experiment_id, inputs_for, retrain_per_step, run_experiment, EmbeddingProvenance, ExperimentConfig, ExperimentOutcome,
    ExperimentReport, FeatureMode, ReportRow, TrainSize,
};
pub use metrics::{
    compute_metrics, f1_score, mean_f1, per_timestep_f1, ClassMetrics, MetricsReport, StepF1, FLAG_NO_LABELS,
    FLAG_PRECISION_UNDEFINED, FLAG_RECALL_UNDEFINED,
};
pub use report::{load_reports, render_table, write_outcome, OutputPaths, TABLE_HEADER};

/// Default last training step.
pub const DEFAULT_BOUNDARY: u32 = 34;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("metrics over an empty index set")]
    EmptyIndexSet,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report format: {0}")]
    Format(String),
}

/// Train on steps `1..=boundary`, test on `boundary+1..=T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub boundary: u32,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { boundary: DEFAULT_BOUNDARY }
    }
}

impl SplitSpec {
    pub fn validate(&self, graph: &TemporalGraph) -> Result<(), BenchError> {
        let t = graph.max_step();
        if self.boundary == 0 || self.boundary >= t {
            return Err(BenchError::Config(format!("split boundary {} must satisfy 1 <= b < {t}", self.boundary)));
        }
        Ok(())
    }
}

/// Labelled node indices on each side of the boundary, in index order.
pub fn temporal_split(graph: &TemporalGraph, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>), BenchError> {
    spec.validate(graph)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for i in 0..graph.node_count() {
        if graph.label(i).class().is_none() {
            continue;
        }
        if graph.time_step(i) <= spec.boundary {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::three_node;
    use crate::graph::synth::{generate, SyntheticConfig};

    #[test]
    fn split_partitions_labelled_nodes() {
        let g = generate(&SyntheticConfig { steps: 5, ..Default::default() }).unwrap();
        let (train, test) = temporal_split(&g, SplitSpec { boundary: 3 }).unwrap();
        assert!(train.iter().all(|&i| g.time_step(i) <= 3));
        assert!(test.iter().all(|&i| g.time_step(i) > 3));
        let labelled = (0..g.node_count()).filter(|&i| g.label(i).class().is_some()).count();
        assert_eq!(train.len() + test.len(), labelled);

        let (_, last) = temporal_split(&g, SplitSpec { boundary: 4 }).unwrap();
        assert!(last.iter().all(|&i| g.time_step(i) == 5));
    }

    #[test]
    fn boundary_range_checked() {
        let g = three_node();
        assert!(temporal_split(&g, SplitSpec { boundary: 2 }).is_err());
        assert!(temporal_split(&g, SplitSpec { boundary: 0 }).is_err());
        let (train, test) = temporal_split(&g, SplitSpec { boundary: 1 }).unwrap();
        assert_eq!(train, vec![0, 1]);
        assert!(test.is_empty());
    }
}
