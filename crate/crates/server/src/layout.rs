//! Global 2D projections shared by every time step.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use txgraph_core::bench::inputs_for;
use txgraph_core::graph::TemporalGraph;
use txgraph_core::models::{gcn_forward, DataView, ModelArtifact};
use txgraph_core::numerics::{pca_project, DenseMatrix};

use crate::ServerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMode {
    RawFeatures,
    GcnActivations,
}

impl LayoutMode {
    /// Short name used in query strings and file names.
    pub fn short(self) -> &'static str {
        match self {
            LayoutMode::RawFeatures => "raw",
            LayoutMode::GcnActivations => "gcn",
        }
    }
}

impl fmt::Display for LayoutMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for LayoutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "raw" | "raw_features" => Ok(LayoutMode::RawFeatures),
            "gcn" | "gcn_activations" => Ok(LayoutMode::GcnActivations),
            _ => Err(format!("unknown layout `{s}` (expected raw or gcn)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionLayout {
    pub mode: LayoutMode,
    /// Artifact id or path the activations came from.
    pub model: Option<String>,
    /// One `[x, y]` per node, in node-index order.
    pub coords: Vec<[f64; 2]>,
}

impl ProjectionLayout {
    pub fn save(&self, path: &Path) -> Result<(), ServerError> {
        let io = |source| ServerError::Io { path: path.to_path_buf(), source };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let json = serde_json::to_string(self).map_err(|e| ServerError::Layout(e.to_string()))?;
        std::fs::write(path, json).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ServerError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&raw).map_err(|e| ServerError::Layout(format!("{}: {e}", path.display())))
    }
}

fn project(x: &DenseMatrix) -> Result<Vec<[f64; 2]>, ServerError> {
    let p = pca_project(x, 2).map_err(|e| ServerError::Layout(e.to_string()))?;
    Ok((0..p.rows()).map(|i| [p.get(i, 0), p.get(i, 1)]).collect())
}

/// PCA over all nodes at once. Raw mode projects the feature columns
/// after the leading time-step column; activation mode projects the
/// pre-softmax output of a (Skip-)GCN artifact.
pub fn build_layout(
    graph: &TemporalGraph,
    mode: LayoutMode,
    artifact: Option<(&str, &ModelArtifact)>,
) -> Result<ProjectionLayout, ServerError> {
    match mode {
        LayoutMode::RawFeatures => {
            let x = graph.features();
            let cols: Vec<usize> = (1..x.cols()).collect();
            Ok(ProjectionLayout { mode, model: None, coords: project(&x.select_cols(&cols))? })
        }
        LayoutMode::GcnActivations => {
            let (name, art) =
                artifact.ok_or_else(|| ServerError::Layout("activation layout needs a trained GCN artifact".into()))?;
            let inputs = inputs_for(graph, art, None).map_err(|e| ServerError::Layout(e.to_string()))?;
            let view = DataView::full(graph, &inputs)?;
            let (nodes, forward) = gcn_forward(art, &view)?;
            let mut z2 = DenseMatrix::zeros(graph.node_count(), forward.z2.cols());
            for (k, &i) in nodes.iter().enumerate() {
                z2.row_mut(i).copy_from_slice(forward.z2.row(k));
            }
            Ok(ProjectionLayout { mode, model: Some(name.to_string()), coords: project(&z2)? })
        }
    }
}
