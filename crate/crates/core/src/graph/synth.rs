//! Seeded synthetic data sets with the release's layout.
//!
//! Each time step is a connected random graph with class homophily. The
//! illicit class shifts the mean of a few local columns; with `shift_step`
//! set, the shifted columns change from that step on, which reproduces a
//! regime change that a model trained on earlier steps cannot anticipate.
//! The aggregated block is computed with
//! [`crate::features::aggregate_neighbor_stats`].

use serde::{Deserialize, Serialize};

use crate::features::{aggregate_neighbor_stats, AggregateConfig};
use crate::label::Label;
use crate::numerics::{DenseMatrix, RngStream};

use super::{GraphError, NodeTable, TemporalGraph, TxId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub steps: u32,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Local columns including the leading time-step column.
    pub local_features: usize,
    pub illicit_rate: f64,
    pub labelled_fraction: f64,
    /// Probability that a new edge joins two nodes of the same class.
    pub homophily: f64,
    /// Extra edges per node beyond the spanning tree.
    pub extra_edges: f64,
    /// Mean shift of the informative columns for illicit nodes.
    pub signal: f64,
    /// First step whose illicit nodes use the alternate informative columns.
    pub shift_step: Option<u32>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            steps: 12,
            min_nodes: 60,
            max_nodes: 120,
            local_features: 12,
            illicit_rate: 0.2,
            labelled_fraction: 0.7,
            homophily: 0.85,
            extra_edges: 0.4,
            signal: 0.9,
            shift_step: None,
            seed: 0,
        }
    }
}

const INFORMATIVE: [usize; 3] = [1, 2, 3];
const SHIFTED: [usize; 3] = [4, 5, 6];

pub fn generate(config: &SyntheticConfig) -> Result<TemporalGraph, GraphError> {
    if config.local_features < 7 || config.min_nodes < 2 || config.max_nodes < config.min_nodes || config.steps == 0 {
        return Err(GraphError::Table(format!("unsupported synthetic config {config:?}")));
    }
    let root = RngStream::new(config.seed);
    let mut ids = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    let mut next_id = 1_000u64;
    let l = config.local_features;

    for t in 1..=config.steps {
        let mut rng = root.derive(t as u64);
        let n = config.min_nodes + rng.below(config.max_nodes - config.min_nodes + 1);
        let illicit: Vec<bool> = (0..n).map(|_| rng.bernoulli(config.illicit_rate)).collect();
        let base = ids.len();
        for &bad in illicit.iter() {
            next_id += 1 + rng.below(5) as u64;
            ids.push(TxId(next_id));
            let start = rows.len();
            rows.push(t as f64);
            rows.extend((1..l).map(|_| rng.normal()));
            if bad {
                let cols = match config.shift_step {
                    Some(s) if t >= s => SHIFTED,
                    _ => INFORMATIVE,
                };
                for c in cols {
                    rows[start + c] += config.signal;
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        let mut add_edge = |rng: &mut RngStream, a: usize, b: usize| {
            let (s, d) = if rng.bernoulli(0.5) { (a, b) } else { (b, a) };
            if s != d && seen.insert((s.min(d), s.max(d))) {
                edges.push((ids[base + s], ids[base + d]));
            }
        };
        let pick_partner = |rng: &mut RngStream, k: usize, limit: usize| -> usize {
            let want_same = rng.bernoulli(config.homophily);
            let candidates: Vec<usize> =
                (0..limit).filter(|&j| j != k && (illicit[j] == illicit[k]) == want_same).collect();
            if candidates.is_empty() {
                let mut j = rng.below(limit);
                if j == k {
                    j = (j + 1) % limit;
                }
                j
            } else {
                candidates[rng.below(candidates.len())]
            }
        };
        for k in 1..n {
            let j = pick_partner(&mut rng, k, k);
            add_edge(&mut rng, j, k);
        }
        let extra = (config.extra_edges * n as f64).round() as usize;
        for _ in 0..extra {
            let k = rng.below(n);
            let j = pick_partner(&mut rng, k, n);
            add_edge(&mut rng, j, k);
        }
        for (k, &bad) in illicit.iter().enumerate() {
            let label = if rng.bernoulli(config.labelled_fraction) {
                if bad { Label::Illicit } else { Label::Licit }
            } else {
                Label::Unknown
            };
            labels.push((ids[base + k], label));
        }
    }

    let local = DenseMatrix::from_vec(ids.len(), l, rows)?;
    let local_table = NodeTable::new(ids.clone(), local.clone(), l)?;
    let local_graph = TemporalGraph::from_parts(local_table, &edges, &labels)?;
    let cfg = AggregateConfig::all_statistics([INFORMATIVE, SHIFTED].concat());
    let aggregated = aggregate_neighbor_stats(&local_graph, &cfg).map_err(|e| GraphError::Table(e.to_string()))?;
    let table = NodeTable::new(ids, local.hcat(aggregated.values())?, l)?;
    TemporalGraph::from_parts(table, &edges, &labels)
}
