//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use txgraph_core::graph::{NodeTable, TemporalGraph, TxId};
use txgraph_core::label::Label;
use txgraph_core::numerics::{DenseMatrix, RngStream, SparseMatrix};

/// Labelled nodes whose own features are pure noise; each one is joined to
/// three unlabelled context nodes whose first informative column carries
/// the label. Only a model that reads neighbours can separate the classes.
pub fn planted_neighborhood(steps: u32, targets_per_step: usize, seed: u64) -> TemporalGraph {
    const COLS: usize = 8;
    const CONTEXT: usize = 3;
    let mut rng = RngStream::new(seed);
    let (mut ids, mut rows, mut edges, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut next = 1u64;
    let mut push_node = |t: u32, rng: &mut RngStream, shift: f64, rows: &mut Vec<f64>, ids: &mut Vec<TxId>| {
        let id = TxId(next);
        next += 1;
        ids.push(id);
        rows.push(t as f64);
        for c in 1..COLS {
            rows.push(rng.normal() * if c == 1 { 0.3 } else { 1.0 } + if c == 1 { shift } else { 0.0 });
        }
        id
    };
    for t in 1..=steps {
        for _ in 0..targets_per_step {
            let illicit = rng.bernoulli(0.3);
            let target = push_node(t, &mut rng, 0.0, &mut rows, &mut ids);
            labels.push((target, if illicit { Label::Illicit } else { Label::Licit }));
            for _ in 0..CONTEXT {
                let shift = if illicit { 2.0 } else { -2.0 };
                let ctx = push_node(t, &mut rng, shift, &mut rows, &mut ids);
                labels.push((ctx, Label::Unknown));
                edges.push(if rng.bernoulli(0.5) { (ctx, target) } else { (target, ctx) });
            }
        }
    }
    let x = DenseMatrix::from_vec(ids.len(), COLS, rows).unwrap();
    let table = NodeTable::new(ids, x, COLS).unwrap();
    TemporalGraph::from_parts(table, &edges, &labels).unwrap()
}

/// Random directed 0/1 adjacency without self-loops.
pub fn random_adjacency(n: usize, p: f64, rng: &mut RngStream) -> SparseMatrix {
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.bernoulli(p) {
                triplets.push((i, j, 1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets).unwrap()
}

/// Two Gaussian blobs in `dims` dimensions, `n` samples, balanced classes.
pub fn two_gaussians(n: usize, dims: usize, separation: f64, seed: u64) -> (DenseMatrix, Vec<txgraph_core::label::Class>) {
    use txgraph_core::label::Class;
    let mut rng = RngStream::new(seed);
    let mut data = Vec::with_capacity(n * dims);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = if i % 2 == 0 { Class::Illicit } else { Class::Licit };
        let centre = if class == Class::Illicit { separation / 2.0 } else { -separation / 2.0 };
        for _ in 0..dims {
            data.push(centre + rng.normal());
        }
        y.push(class);
    }
    (DenseMatrix::from_vec(n, dims, data).unwrap(), y)
}
