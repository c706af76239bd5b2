//! State loaded once at startup and shared by every request.

use std::collections::BTreeMap;

use txgraph_core::bench::ExperimentReport;
use txgraph_core::graph::TemporalGraph;
use txgraph_core::label::{Class, Label};
use txgraph_core::models::Prediction;

use crate::{LayoutMode, ProjectionLayout, ServerError};

pub struct Snapshot {
    pub graph: TemporalGraph,
    pub layouts: BTreeMap<LayoutMode, ProjectionLayout>,
    /// Predicted class per node from the active model; `None` for nodes the
    /// model was not run on.
    pub predictions: Vec<Option<Class>>,
    pub active_model: Option<String>,
    pub experiments: Vec<ExperimentReport>,
}

impl Snapshot {
    pub fn new(
        graph: TemporalGraph,
        layouts: Vec<ProjectionLayout>,
        prediction: Option<(String, Prediction)>,
        experiments: Vec<ExperimentReport>,
    ) -> Result<Self, ServerError> {
        if layouts.is_empty() {
            return Err(ServerError::Snapshot("at least one layout is required".into()));
        }
        let n = graph.node_count();
        let mut by_mode = BTreeMap::new();
        for l in layouts {
            if l.coords.len() != n {
                return Err(ServerError::Snapshot(format!(
                    "{} layout has {} coordinates for {n} nodes",
                    l.mode,
                    l.coords.len()
                )));
            }
            by_mode.insert(l.mode, l);
        }
        let mut predictions = vec![None; n];
        let active_model = prediction.map(|(name, p)| {
            for (&i, c) in p.nodes.iter().zip(p.classes()) {
                predictions[i] = Some(c);
            }
            name
        });
        Ok(Self { graph, layouts: by_mode, predictions, active_model, experiments })
    }

    /// The layout used when a request names none: raw if loaded.
    pub fn default_layout(&self) -> LayoutMode {
        if self.layouts.contains_key(&LayoutMode::RawFeatures) {
            LayoutMode::RawFeatures
        } else {
            *self.layouts.keys().next().expect("constructor requires a layout")
        }
    }
}

/// Edge counts by `[source class][target class]` over
/// `[illicit, licit, unknown]`.
pub fn transfer_matrix(graph: &TemporalGraph, edges: &[(usize, usize)]) -> [[usize; 3]; 3] {
    let mut m = [[0; 3]; 3];
    for &(u, v) in edges {
        m[graph.label(u).index()][graph.label(v).index()] += 1;
    }
    m
}

pub(crate) fn label_counts(graph: &TemporalGraph, nodes: &[usize]) -> [usize; 3] {
    let mut c = [0; 3];
    for &i in nodes {
        c[graph.label(i).index()] += 1;
    }
    c
}

pub(crate) fn label_name(label: Label) -> String {
    label.to_string()
}
