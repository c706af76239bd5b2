//! Immutable, time-sliced directed transaction graph.

mod ingest;
pub mod synth;
mod validate;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::numerics::{DenseMatrix, NumericsError};

pub use ingest::{export, ingest, ingest_dir, DatasetPaths, IngestOptions};
pub use validate::{validate, ValidationReport};

/// Number of leading feature columns that describe the transaction itself.
pub const DEFAULT_LOCAL_COUNT: usize = 94;
/// Local plus one-hop aggregated columns in the public release.
pub const DEFAULT_TOTAL_COUNT: usize = 166;

/// Opaque transaction identifier as read from the release files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },
    #[error("duplicate transaction id {id} ({file}:{line})")]
    DuplicateNode { id: TxId, file: String, line: u64 },
    #[error("edge {from} -> {to} references a transaction missing from the features file (line {line})")]
    MissingEndpoint { from: TxId, to: TxId, line: u64 },
    #[error("class entry for unknown transaction {id} (line {line})")]
    UnknownLabelledNode { id: TxId, line: u64 },
    #[error("duplicate class entry for transaction {id} (line {line})")]
    DuplicateLabel { id: TxId, line: u64 },
    #[error("self-loop on transaction {id}")]
    SelfLoop { id: TxId },
    #[error("edge {from} -> {to} connects time steps {from_step} and {to_step}")]
    CrossStepEdge { from: TxId, to: TxId, from_step: u32, to_step: u32 },
    #[error("time step {step} outside 1..={max}")]
    StepOutOfRange { step: u32, max: u32 },
    #[error("node table: {0}")]
    Table(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Per-node identifiers, time steps and the dense feature table.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeTable {
    ids: Vec<TxId>,
    time_steps: Vec<u32>,
    features: DenseMatrix,
    local_count: usize,
}

impl NodeTable {
    /// The first feature column must equal the node's time step.
    pub fn new(ids: Vec<TxId>, features: DenseMatrix, local_count: usize) -> Result<Self, GraphError> {
        if ids.len() != features.rows() {
            return Err(GraphError::Table(format!(
                "{} ids for {} feature rows",
                ids.len(),
                features.rows()
            )));
        }
        if local_count == 0 || local_count > features.cols() {
            return Err(GraphError::Table(format!(
                "local count {local_count} with {} feature columns",
                features.cols()
            )));
        }
        let mut time_steps = Vec::with_capacity(ids.len());
        for (r, id) in ids.iter().enumerate() {
            let ts = features.get(r, 0);
            if ts < 1.0 || ts.fract() != 0.0 || ts > u32::MAX as f64 {
                return Err(GraphError::Table(format!("transaction {id}: time step {ts} is not a positive integer")));
            }
            time_steps.push(ts as u32);
        }
        let mut seen = HashMap::with_capacity(ids.len());
        for (r, id) in ids.iter().enumerate() {
            if seen.insert(*id, r).is_some() {
                return Err(GraphError::DuplicateNode { id: *id, file: "node table".into(), line: r as u64 + 1 });
            }
        }
        Ok(Self { ids, time_steps, features, local_count })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[TxId] {
        &self.ids
    }

    pub fn time_steps(&self) -> &[u32] {
        &self.time_steps
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn local_count(&self) -> usize {
        self.local_count
    }

    pub fn total_count(&self) -> usize {
        self.features.cols()
    }
}

/// The transaction graph: nodes remapped to contiguous indices in file
/// order, directed adjacency in both orientations, labels and per-step
/// slices. Never mutated after construction.
#[derive(Clone, Debug)]
pub struct TemporalGraph {
    nodes: NodeTable,
    index: HashMap<TxId, usize>,
    edges: Vec<(usize, usize)>,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
    labels: Vec<Label>,
    slices: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

impl PartialEq for TemporalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges && self.labels == other.labels
    }
}

impl TemporalGraph {
    /// Builds the graph. Edges are given by transaction id; duplicates are
    /// collapsed with a warning. Nodes absent from `labels` are unknown.
    pub fn from_parts(
        nodes: NodeTable,
        edges: &[(TxId, TxId)],
        labels: &[(TxId, Label)],
    ) -> Result<Self, GraphError> {
        let index: HashMap<TxId, usize> = nodes.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let n = nodes.len();
        let mut warnings = Vec::new();

        let mut label_vec = vec![Label::Unknown; n];
        let mut labelled = vec![false; n];
        for (line, (id, label)) in labels.iter().enumerate() {
            let &i = index
                .get(id)
                .ok_or(GraphError::UnknownLabelledNode { id: *id, line: line as u64 + 1 })?;
            if labelled[i] {
                return Err(GraphError::DuplicateLabel { id: *id, line: line as u64 + 1 });
            }
            labelled[i] = true;
            label_vec[i] = *label;
        }

        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut resolved = Vec::with_capacity(edges.len());
        let mut duplicates = 0usize;
        for (line, &(s, t)) in edges.iter().enumerate() {
            let (Some(&u), Some(&v)) = (index.get(&s), index.get(&t)) else {
                return Err(GraphError::MissingEndpoint { from: s, to: t, line: line as u64 + 1 });
            };
            if u == v {
                return Err(GraphError::SelfLoop { id: s });
            }
            let (su, sv) = (nodes.time_steps[u], nodes.time_steps[v]);
            if su != sv {
                return Err(GraphError::CrossStepEdge { from: s, to: t, from_step: su, to_step: sv });
            }
            if seen.insert((u, v)) {
                resolved.push((u, v));
            } else {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            let msg = format!("collapsed {duplicates} duplicate edges");
            log::warn!("{msg}");
            warnings.push(msg);
        }

        let (out_offsets, out_targets) = csr(n, resolved.iter().copied());
        let (in_offsets, in_sources) = csr(n, resolved.iter().map(|&(u, v)| (v, u)));

        let max_step = nodes.time_steps.iter().copied().max().unwrap_or(0) as usize;
        let mut slices = vec![Vec::new(); max_step];
        for (i, &t) in nodes.time_steps.iter().enumerate() {
            slices[t as usize - 1].push(i);
        }

        Ok(Self {
            nodes,
            index,
            edges: resolved,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            labels: label_vec,
            slices,
            warnings,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Largest time step `T`; steps are numbered `1..=T`.
    pub fn max_step(&self) -> u32 {
        self.slices.len() as u32
    }

    pub fn nodes(&self) -> &NodeTable {
        &self.nodes
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.nodes.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn time_step(&self, i: usize) -> u32 {
        self.nodes.time_steps[i]
    }

    pub fn tx_id(&self, i: usize) -> TxId {
        self.nodes.ids[i]
    }

    pub fn index_of(&self, id: TxId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Directed edges as index pairs, duplicates removed, in file order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]]
    }

    /// Node indices at step `t`, ascending. Empty for out-of-range steps.
    pub fn step_nodes(&self, t: u32) -> &[usize] {
        if t == 0 {
            return &[];
        }
        self.slices.get(t as usize - 1).map_or(&[], Vec::as_slice)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Induced subgraph of one time step.
    pub fn slice(&self, t: u32) -> Result<GraphSlice, GraphError> {
        if t == 0 || t > self.max_step() {
            return Err(GraphError::StepOutOfRange { step: t, max: self.max_step() });
        }
        let nodes = self.step_nodes(t).to_vec();
        let edges = nodes
            .iter()
            .flat_map(|&u| self.out_neighbors(u).iter().map(move |&v| (u, v)))
            .collect();
        let labels = nodes.iter().map(|&i| self.labels[i]).collect();
        let features = self.nodes.features.select_rows(&nodes);
        Ok(GraphSlice { step: t, nodes, edges, labels, features })
    }
}

/// One time step's nodes (global indices), induced edges, labels and rows.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSlice {
    pub step: u32,
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<Label>,
    pub features: DenseMatrix,
}

fn csr(n: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; n + 1];
    for (u, _) in pairs.clone() {
        offsets[u + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut targets = vec![0usize; offsets[n]];
    for (u, v) in pairs {
        targets[cursor[u]] = v;
        cursor[u] += 1;
    }
    for i in 0..n {
        targets[offsets[i]..offsets[i + 1]].sort_unstable();
    }
    (offsets, targets)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Nodes a, b at step 1 joined by one edge; isolated c at step 2.
    /// Labels illicit, licit, unknown. 94 feature columns.
    pub fn three_node() -> TemporalGraph {
        let cols = DEFAULT_LOCAL_COUNT;
        let mut data = Vec::new();
        for (ts, base) in [(1.0, 0.1), (1.0, 0.2), (2.0, 0.3)] {
            data.push(ts);
            data.extend((1..cols).map(|j| base * j as f64));
        }
        let table = NodeTable::new(
            vec![TxId(101), TxId(202), TxId(303)],
            DenseMatrix::from_vec(3, cols, data).unwrap(),
            DEFAULT_LOCAL_COUNT,
        )
        .unwrap();
        TemporalGraph::from_parts(
            table,
            &[(TxId(101), TxId(202))],
            &[(TxId(101), Label::Illicit), (TxId(202), Label::Licit), (TxId(303), Label::Unknown)],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::three_node;
    use super::*;

    #[test]
    fn fixture_shape() {
        let g = three_node();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.max_step(), 2);
        assert_eq!(g.step_nodes(1), &[0, 1]);
        assert_eq!(g.step_nodes(2), &[2]);
        assert_eq!(g.out_neighbors(0), &[1]);
        assert_eq!(g.in_neighbors(1), &[0]);
        assert_eq!(g.label_counts(), [1, 1, 1]);
    }

    #[test]
    fn slices() {
        let g = three_node();
        let s1 = g.slice(1).unwrap();
        assert_eq!((s1.nodes.len(), s1.edges.len()), (2, 1));
        let s2 = g.slice(2).unwrap();
        assert_eq!((s2.nodes.len(), s2.edges.len()), (1, 0));
        assert!(matches!(g.slice(3), Err(GraphError::StepOutOfRange { step: 3, max: 2 })));
        assert!(g.slice(0).is_err());
    }

    #[test]
    fn duplicate_edges_collapse_with_warning() {
        let g = three_node();
        let g2 = TemporalGraph::from_parts(
            g.nodes().clone(),
            &[(TxId(101), TxId(202)), (TxId(101), TxId(202))],
            &[],
        )
        .unwrap();
        assert_eq!(g2.edge_count(), 1);
        assert_eq!(g2.warnings().len(), 1);
        assert_eq!(g2.label_counts(), [0, 0, 3]);
    }

    #[test]
    fn structural_errors() {
        let nodes = three_node().nodes().clone();
        assert!(matches!(
            TemporalGraph::from_parts(nodes.clone(), &[(TxId(101), TxId(999))], &[]),
            Err(GraphError::MissingEndpoint { to: TxId(999), .. })
        ));
        assert!(matches!(
            TemporalGraph::from_parts(nodes.clone(), &[(TxId(101), TxId(303))], &[]),
            Err(GraphError::CrossStepEdge { from_step: 1, to_step: 2, .. })
        ));
        assert!(matches!(
            TemporalGraph::from_parts(nodes.clone(), &[(TxId(101), TxId(101))], &[]),
            Err(GraphError::SelfLoop { .. })
        ));
        assert!(matches!(
            TemporalGraph::from_parts(nodes, &[], &[(TxId(5), Label::Licit)]),
            Err(GraphError::UnknownLabelledNode { .. })
        ));
    }

    #[test]
    fn node_table_checks_time_step_column() {
        let bad = DenseMatrix::from_vec(1, 2, vec![0.5, 1.0]).unwrap();
        assert!(NodeTable::new(vec![TxId(1)], bad, 1).is_err());
        let dup = DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            NodeTable::new(vec![TxId(1), TxId(1)], dup, 1),
            Err(GraphError::DuplicateNode { .. })
        ));
    }
}
