//! Cross-checks against independent implementations.

mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use txgraph_core::features::{aggregate_neighbor_stats, AggregateConfig, Direction, Statistic};
use txgraph_core::graph::synth::{generate, SyntheticConfig};
use txgraph_core::graph::{export, ingest, DatasetPaths, IngestOptions};
use txgraph_core::label::{Class, ClassWeights};
use txgraph_core::models::{train_forest, DataView, DecisionTree, ForestConfig, ModelRegistry};
use txgraph_core::numerics::{normalize_adjacency, pca_fit, DenseMatrix, RngStream};

fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

#[test]
fn normalized_adjacency_matches_dense_formula_and_spectrum() {
    let mut rng = RngStream::new(11);
    for trial in 0..100 {
        let n = 2 + rng.below(29);
        let p = rng.uniform_range(0.02, 0.5);
        let raw = common::random_adjacency(n, p, &mut rng);
        let ours = to_nalgebra(&normalize_adjacency(&raw, true).unwrap().to_dense());

        let a = to_nalgebra(&raw.to_dense());
        let mut sym = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j && (a[(i, j)] != 0.0 || a[(j, i)] != 0.0) {
                    sym[(i, j)] = 1.0;
                }
            }
        }
        let d: Vec<f64> = (0..n).map(|i| sym.row(i).sum()).collect();
        let expected = DMatrix::from_fn(n, n, |i, j| sym[(i, j)] / (d[i] * d[j]).sqrt());
        assert!((&ours - &expected).amax() < 1e-12, "trial {trial}");

        let eig = SymmetricEigen::new(ours).eigenvalues;
        let max = eig.max();
        assert!((max - 1.0).abs() < 1e-10, "trial {trial}: largest eigenvalue {max}");
        assert!(eig.iter().all(|&l| l > -1.0 && l <= 1.0 + 1e-10), "trial {trial}: {eig:?}");
    }
}

#[test]
fn pca_variances_match_covariance_eigenvalues() {
    let mut rng = RngStream::new(3);
    let n = 80;
    let scales = [5.0, 3.0, 2.0, 1.0, 0.5, 0.2];
    let data: Vec<f64> = (0..n).flat_map(|_| scales.iter().map(|s| s * rng.normal()).collect::<Vec<_>>()).collect();
    let x = DenseMatrix::from_vec(n, scales.len(), data).unwrap();
    let fit = pca_fit(&x, 3).unwrap();

    let m = to_nalgebra(&x);
    let mean = m.row_mean();
    let centred = DMatrix::from_fn(n, m.ncols(), |i, j| m[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for (k, &idx) in order.iter().take(3).enumerate() {
        let rel = (fit.variances[k] - eig.eigenvalues[idx]).abs() / eig.eigenvalues[idx];
        assert!(rel < 1e-6, "component {k}: {} vs {}", fit.variances[k], eig.eigenvalues[idx]);
        let v = eig.eigenvectors.column(idx);
        let cos: f64 = fit.axes[k].iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        assert!((cos.abs() - 1.0).abs() < 1e-6, "component {k}: |cos| = {}", cos.abs());
    }
}

/// Exhaustive CART: every feature, every midpoint, unweighted Gini, grown
/// until pure or unsplittable.
enum RefNode {
    Leaf(f64),
    Split(usize, f64, Box<RefNode>, Box<RefNode>),
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

fn reference_tree(x: &DenseMatrix, y: &[Class], rows: &[usize]) -> RefNode {
    let pos = rows.iter().filter(|&&r| y[r] == Class::Illicit).count() as f64;
    let total = rows.len() as f64;
    if pos == 0.0 || pos == total {
        return RefNode::Leaf(pos / total);
    }
    let parent = gini(pos, total);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.cols() {
        let mut sorted: Vec<usize> = rows.to_vec();
        sorted.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let mut left_pos = 0.0;
        for k in 0..sorted.len() - 1 {
            if y[sorted[k]] == Class::Illicit {
                left_pos += 1.0;
            }
            let (lo, hi) = (x.get(sorted[k], f), x.get(sorted[k + 1], f));
            if lo == hi {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = total - nl;
            let gain = parent - nl / total * gini(left_pos, nl) - nr / total * gini(pos - left_pos, nr);
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, (lo + hi) / 2.0));
            }
        }
    }
    match best {
        None => RefNode::Leaf(pos / total),
        Some((_, f, thr)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, f) <= thr);
            RefNode::Split(f, thr, Box::new(reference_tree(x, y, &l)), Box::new(reference_tree(x, y, &r)))
        }
    }
}

fn reference_predict(node: &RefNode, row: &[f64]) -> f64 {
    match node {
        RefNode::Leaf(p) => *p,
        RefNode::Split(f, t, l, r) => reference_predict(if row[*f] <= *t { l } else { r }, row),
    }
}

#[test]
fn forest_accuracy_matches_reference_cart() {
    let (x, y) = common::two_gaussians(200, 2, 3.0, 21);
    let (xt, yt) = common::two_gaussians(1000, 2, 3.0, 22);
    let reference = reference_tree(&x, &y, &(0..200).collect::<Vec<_>>());
    let mut rng = RngStream::new(5);
    let tree = DecisionTree::fit(&x, &y, (0..200).collect(), 2, ClassWeights::UNIFORM, &mut rng);
    let forest = train_forest(&x, &y, &ForestConfig { class_weights: ClassWeights::UNIFORM, ..Default::default() }, 0).unwrap();
    let forest_probs = forest.probs(&xt).unwrap();

    let classify = |p: f64| if p > 0.5 { Class::Illicit } else { Class::Licit };
    let n = xt.rows() as f64;
    let accuracy = |pred: &dyn Fn(usize) -> Class| (0..xt.rows()).filter(|&i| pred(i) == yt[i]).count() as f64 / n;
    let reference_acc = accuracy(&|i| classify(reference_predict(&reference, xt.row(i))));
    let tree_acc = accuracy(&|i| classify(tree.illicit_probability(xt.row(i))));
    let forest_acc = accuracy(&|i| Class::from_probs(forest_probs.row(i)));

    assert!(forest_acc > 0.95, "forest accuracy {forest_acc}");
    assert!((tree_acc - reference_acc).abs() <= 0.02, "tree {tree_acc} vs reference {reference_acc}");
    assert!((forest_acc - reference_acc).abs() <= 0.02, "forest {forest_acc} vs reference {reference_acc}");
    for i in 0..200 {
        assert_eq!(classify(tree.illicit_probability(x.row(i))), y[i]);
        assert_eq!(classify(reference_predict(&reference, x.row(i))), y[i]);
    }
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[test]
fn neighbour_aggregates_match_brute_force() {
    let g = generate(&SyntheticConfig { steps: 1, min_nodes: 50, max_nodes: 50, extra_edges: 1.0, ..Default::default() })
        .unwrap();
    assert_eq!(g.node_count(), 50);
    let cols = vec![1, 2, 5];
    let cfg = AggregateConfig::all_statistics(cols.clone());
    let agg = aggregate_neighbor_stats(&g, &cfg).unwrap();
    let x = g.features();
    for i in 0..50 {
        let mut k = 0;
        for dir in [Direction::In, Direction::Out] {
            let nbrs: Vec<usize> = g
                .edges()
                .iter()
                .filter_map(|&(u, v)| match dir {
                    Direction::In if v == i => Some(u),
                    Direction::Out if u == i => Some(v),
                    _ => None,
                })
                .collect();
            for &c in &cols {
                let vals: Vec<f64> = nbrs.iter().map(|&j| x.get(j, c)).collect();
                for stat in Statistic::ALL {
                    let expected = if vals.is_empty() {
                        0.0
                    } else {
                        match stat {
                            Statistic::Min => vals.iter().cloned().fold(f64::INFINITY, f64::min),
                            Statistic::Max => vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                            Statistic::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                            Statistic::Std => sample_std(&vals),
                        }
                    };
                    let got = agg.values().get(i, k);
                    assert!((got - expected).abs() < 1e-12, "node {i} col {c} {stat:?} {dir:?}: {got} vs {expected}");
                    k += 1;
                }
            }
            assert_eq!(agg.values().get(i, k), nbrs.len() as f64);
            k += 1;
        }
    }
}

#[test]
fn export_then_ingest_round_trips() {
    let g = generate(&SyntheticConfig { steps: 3, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = DatasetPaths::in_dir(dir.path());
    export(&g, &paths).unwrap();
    let back = ingest(&paths, IngestOptions { local_count: g.nodes().local_count() }).unwrap();
    assert_eq!(back, g);
}

#[test]
fn training_loss_decreases_over_windows() {
    let g = generate(&SyntheticConfig { steps: 4, ..Default::default() }).unwrap();
    let view = DataView::full(&g, g.features()).unwrap();
    for name in ["logreg", "mlp", "gcn", "skip-gcn", "evolvegcn"] {
        let family = ModelRegistry::builtin().get(name).unwrap();
        let art = family.fit(&view, &family.default_hyperparameters(), 0).unwrap();
        let trace = &art.loss_trace;
        let w = (trace.len() / 10).max(1);
        let head = trace[..w].iter().sum::<f64>() / w as f64;
        let tail = trace[trace.len() - w..].iter().sum::<f64>() / w as f64;
        assert!(tail < head, "{name}: first window {head}, last window {tail}");
    }
}
