//! Step-bounded read access to a graph and its assembled features.
//!
//! Every model reads its inputs through a [`DataView`]. A view covers a
//! contiguous range of time steps and refuses to hand out features, labels
//! or adjacency for nodes outside it. An optional [`AccessMonitor`] counts
//! each read per time step, which lets tests prove that training never
//! touched the test span.

use std::ops::RangeInclusive;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::graph::TemporalGraph;
use crate::label::Class;
use crate::numerics::{normalize_adjacency, DenseMatrix, SparseMatrix};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessKind {
    Features,
    Labels,
    Adjacency,
}

impl AccessKind {
    pub const ALL: [AccessKind; 3] = [AccessKind::Features, AccessKind::Labels, AccessKind::Adjacency];

    fn slot(self) -> usize {
        match self {
            AccessKind::Features => 0,
            AccessKind::Labels => 1,
            AccessKind::Adjacency => 2,
        }
    }
}

/// Per-step read counters, safe to share across threads.
#[derive(Debug)]
pub struct AccessMonitor {
    counts: Vec<[AtomicU64; 3]>,
}

impl AccessMonitor {
    pub fn new(max_step: u32) -> Self {
        Self { counts: (0..=max_step).map(|_| Default::default()).collect() }
    }

    fn record(&self, step: u32, kind: AccessKind, n: u64) {
        if let Some(c) = self.counts.get(step as usize) {
            c[kind.slot()].fetch_add(n, Ordering::Relaxed);
        }
    }

    pub fn reads(&self, step: u32, kind: AccessKind) -> u64 {
        self.counts.get(step as usize).map_or(0, |c| c[kind.slot()].load(Ordering::Relaxed))
    }

    /// All reads of any kind at steps strictly after `boundary`.
    pub fn reads_after(&self, boundary: u32) -> u64 {
        self.total(|s| s > boundary)
    }

    /// All reads of any kind at steps up to and including `boundary`.
    pub fn reads_through(&self, boundary: u32) -> u64 {
        self.total(|s| s <= boundary)
    }

    fn total(&self, keep: impl Fn(u32) -> bool) -> u64 {
        (0..self.counts.len() as u32)
            .filter(|&s| keep(s))
            .map(|s| AccessKind::ALL.iter().map(|&k| self.reads(s, k)).sum::<u64>())
            .sum()
    }

    pub fn reset(&self) {
        for c in &self.counts {
            for a in c {
                a.store(0, Ordering::Relaxed);
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DataView<'a> {
    graph: &'a TemporalGraph,
    features: &'a DenseMatrix,
    first: u32,
    last: u32,
    monitor: Option<&'a AccessMonitor>,
}

impl<'a> DataView<'a> {
    /// `features` holds one row per graph node; `steps` must lie in `1..=T`.
    pub fn new(
        graph: &'a TemporalGraph,
        features: &'a DenseMatrix,
        steps: RangeInclusive<u32>,
    ) -> Result<Self, ModelError> {
        if features.rows() != graph.node_count() {
            return Err(ModelError::Config(format!(
                "{} feature rows for {} nodes",
                features.rows(),
                graph.node_count()
            )));
        }
        let (first, last) = (*steps.start(), *steps.end());
        if first == 0 || first > last || last > graph.max_step() {
            return Err(ModelError::Config(format!(
                "step range {first}..={last} outside 1..={}",
                graph.max_step()
            )));
        }
        Ok(Self { graph, features, first, last, monitor: None })
    }

    /// Every step of the graph.
    pub fn full(graph: &'a TemporalGraph, features: &'a DenseMatrix) -> Result<Self, ModelError> {
        Self::new(graph, features, 1..=graph.max_step().max(1))
    }

    pub fn with_monitor(mut self, monitor: &'a AccessMonitor) -> Self {
        self.monitor = Some(monitor);
        self
    }

    /// A narrower view over a sub-range of this one.
    pub fn restrict(&self, steps: RangeInclusive<u32>) -> Result<Self, ModelError> {
        let (first, last) = (*steps.start(), *steps.end());
        if first < self.first || last > self.last || first > last {
            return Err(ModelError::OutOfView { step: if first < self.first { first } else { last }, first: self.first, last: self.last });
        }
        Ok(Self { first, last, ..*self })
    }

    pub fn steps(&self) -> RangeInclusive<u32> {
        self.first..=self.last
    }

    pub fn first_step(&self) -> u32 {
        self.first
    }

    pub fn last_step(&self) -> u32 {
        self.last
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    /// Node indices at step `t`; empty outside the view.
    pub fn step_nodes(&self, t: u32) -> &'a [usize] {
        if t < self.first || t > self.last {
            return &[];
        }
        self.graph.step_nodes(t)
    }

    /// Every node in the view, step by step.
    pub fn nodes(&self) -> Vec<usize> {
        self.steps().flat_map(|t| self.step_nodes(t).iter().copied()).collect()
    }

    pub fn time_step(&self, node: usize) -> u32 {
        self.graph.time_step(node)
    }

    fn check(&self, nodes: &[usize], kind: AccessKind) -> Result<(), ModelError> {
        for &i in nodes {
            let s = self.graph.time_step(i);
            if s < self.first || s > self.last {
                return Err(ModelError::OutOfView { step: s, first: self.first, last: self.last });
            }
        }
        if let Some(m) = self.monitor {
            for &i in nodes {
                m.record(self.graph.time_step(i), kind, 1);
            }
        }
        Ok(())
    }

    pub fn features_of(&self, nodes: &[usize]) -> Result<DenseMatrix, ModelError> {
        self.check(nodes, AccessKind::Features)?;
        Ok(self.features.select_rows(nodes))
    }

    /// Binary targets, `None` for unknown labels.
    pub fn labels_of(&self, nodes: &[usize]) -> Result<Vec<Option<Class>>, ModelError> {
        self.check(nodes, AccessKind::Labels)?;
        Ok(nodes.iter().map(|&i| self.graph.label(i).class()).collect())
    }

    /// Labelled nodes of the view in step order.
    pub fn labelled_nodes(&self) -> Result<Vec<usize>, ModelError> {
        let nodes = self.nodes();
        let labels = self.labels_of(&nodes)?;
        Ok(nodes.into_iter().zip(labels).filter(|(_, l)| l.is_some()).map(|(i, _)| i).collect())
    }

    /// Symmetrized, normalized adjacency of the subgraph induced by
    /// `nodes`, rows and columns in the order given. Over whole slices this
    /// is block diagonal because no edge crosses steps.
    pub fn adjacency(&self, nodes: &[usize]) -> Result<SparseMatrix, ModelError> {
        self.check(nodes, AccessKind::Adjacency)?;
        let mut local = std::collections::HashMap::with_capacity(nodes.len());
        for (k, &i) in nodes.iter().enumerate() {
            local.insert(i, k);
        }
        let mut triplets = Vec::new();
        for (k, &i) in nodes.iter().enumerate() {
            for j in self.graph.out_neighbors(i) {
                if let Some(&m) = local.get(j) {
                    triplets.push((k, m, 1.0));
                }
            }
        }
        let raw = SparseMatrix::from_triplets(nodes.len(), nodes.len(), triplets)?;
        Ok(normalize_adjacency(&raw, true)?)
    }
}
