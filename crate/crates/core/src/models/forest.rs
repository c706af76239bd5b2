//! Random forest of fully grown Gini trees.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::label::{Class, ClassWeights};
use crate::numerics::{DenseMatrix, RngStream};

use super::{
    expect_params, training_rows, DataView, Hyperparameters, ModelArtifact, ModelError, ModelFamily, ModelParams,
    Prediction, ARTIFACT_FORMAT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub estimators: usize,
    /// Features examined per split, capped at the column count.
    pub max_features: usize,
    /// Train each tree on a with-replacement resample of the training rows.
    pub bootstrap: bool,
    /// Per-sample weights in the Gini counts.
    pub class_weights: ClassWeights,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { estimators: 50, max_features: 50, bootstrap: true, class_weights: ClassWeights::default() }
    }
}

/// `1 − Σ p_c²` over weighted counts `[licit, illicit]`.
pub fn gini_impurity(counts: [f64; 2]) -> f64 {
    let total = counts[0] + counts[1];
    if total <= 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] / total, counts[1] / total);
    1.0 - p0 * p0 - p1 * p1
}

/// Parent impurity minus the weight-averaged child impurities.
pub fn split_gain(parent: [f64; 2], left: [f64; 2], right: [f64; 2]) -> f64 {
    let total = parent[0] + parent[1];
    let wl = (left[0] + left[1]) / total;
    let wr = (right[0] + right[1]) / total;
    gini_impurity(parent) - wl * gini_impurity(left) - wr * gini_impurity(right)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Weighted class counts `[licit, illicit]` of the training rows here.
    Leaf { counts: [f64; 2] },
}

/// Nodes in creation order; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
    split_at: usize,
    order: Vec<usize>,
}

impl DecisionTree {
    /// Grows a tree on `sample` (row indices into `x`, repeats allowed)
    /// until nodes are pure or no sampled feature separates them. Any
    /// valid split is taken, even at zero gain, so consistent data is
    /// always memorized.
    pub fn fit(
        x: &DenseMatrix,
        y: &[Class],
        sample: Vec<usize>,
        max_features: usize,
        weights: ClassWeights,
        rng: &mut RngStream,
    ) -> Self {
        let mut nodes = vec![TreeNode::Leaf { counts: [0.0; 2] }];
        let mut stack = vec![(0usize, sample)];
        let features: Vec<usize> = (0..x.cols()).collect();
        while let Some((id, rows)) = stack.pop() {
            let counts = class_counts(&rows, y, weights);
            if counts[0] == 0.0 || counts[1] == 0.0 {
                nodes[id] = TreeNode::Leaf { counts };
                continue;
            }
            let mut order = features.clone();
            rng.shuffle(&mut order);
            match best_split(x, y, &rows, &order, max_features, weights, counts) {
                None => nodes[id] = TreeNode::Leaf { counts },
                Some(best) => {
                    let left = nodes.len();
                    nodes.push(TreeNode::Leaf { counts: [0.0; 2] });
                    nodes.push(TreeNode::Leaf { counts: [0.0; 2] });
                    nodes[id] = TreeNode::Split { feature: best.feature, threshold: best.threshold, left, right: left + 1 };
                    let (l, r) = best.order.split_at(best.split_at);
                    stack.push((left + 1, r.to_vec()));
                    stack.push((left, l.to_vec()));
                }
            }
        }
        Self { nodes }
    }

    pub fn leaf_counts(&self, row: &[f64]) -> [f64; 2] {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split { feature, threshold, left, right } => {
                    k = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Illicit share of the leaf reached by `row`.
    pub fn illicit_probability(&self, row: &[f64]) -> f64 {
        let c = self.leaf_counts(row);
        let total = c[0] + c[1];
        if total > 0.0 { c[1] / total } else { 0.0 }
    }

    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((k, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[k] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        deepest
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

fn class_counts(rows: &[usize], y: &[Class], weights: ClassWeights) -> [f64; 2] {
    let mut c = [0.0; 2];
    for &i in rows {
        c[y[i].index()] += weights.of(y[i]);
    }
    c
}

#[allow(clippy::too_many_arguments)]
fn best_split(
    x: &DenseMatrix,
    y: &[Class],
    rows: &[usize],
    order: &[usize],
    max_features: usize,
    weights: ClassWeights,
    parent: [f64; 2],
) -> Option<Best> {
    let mut best: Option<Best> = None;
    let mut visited = 0;
    for &f in order {
        if visited >= max_features {
            break;
        }
        let mut sorted = rows.to_vec();
        sorted.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let lo = x.get(sorted[0], f);
        let hi = x.get(sorted[sorted.len() - 1], f);
        if lo == hi {
            continue;
        }
        visited += 1;
        let mut left = [0.0; 2];
        let mut found: Option<(f64, usize, f64)> = None;
        for k in 0..sorted.len() - 1 {
            let i = sorted[k];
            left[y[i].index()] += weights.of(y[i]);
            let (v, next) = (x.get(i, f), x.get(sorted[k + 1], f));
            if v == next {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let gain = split_gain(parent, left, right);
            if found.is_none_or(|(g, _, _)| gain > g) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                found = Some((gain, k + 1, threshold));
            }
        }
        if let Some((gain, split_at, threshold)) = found {
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Best { feature: f, threshold, gain, split_at, order: sorted });
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<DecisionTree>,
    pub feature_count: usize,
}

impl ForestParams {
    /// Mean leaf distribution over trees. Per-tree values are summed in
    /// sorted order, which makes the result independent of tree order.
    pub fn probs(&self, x: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
        if x.cols() != self.feature_count {
            return Err(ModelError::FeatureCount { expected: self.feature_count, found: x.cols() });
        }
        let n = self.trees.len().max(1) as f64;
        let mut out = DenseMatrix::zeros(x.rows(), 2);
        out.as_mut_slice().par_chunks_mut(2).enumerate().for_each(|(i, o)| {
            let row = x.row(i);
            let mut votes: Vec<f64> = self.trees.iter().map(|t| t.illicit_probability(row)).collect();
            votes.sort_by(f64::total_cmp);
            let p = votes.iter().sum::<f64>() / n;
            o[0] = 1.0 - p;
            o[1] = p;
        });
        Ok(out)
    }
}

/// Trains `config.estimators` trees in parallel, tree `k` drawing from
/// stream `k` of `seed`.
pub fn train_forest(
    x: &DenseMatrix,
    y: &[Class],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestParams, ModelError> {
    if y.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    if config.estimators == 0 || config.max_features == 0 {
        return Err(ModelError::Config("estimators and max_features must be positive".into()));
    }
    let root = RngStream::new(seed).derive(0x30);
    let max_features = config.max_features.min(x.cols());
    let n = y.len();
    let trees = (0..config.estimators)
        .into_par_iter()
        .map(|k| {
            let mut rng = root.derive(k as u64);
            let sample: Vec<usize> =
                if config.bootstrap { (0..n).map(|_| rng.below(n)).collect() } else { (0..n).collect() };
            DecisionTree::fit(x, y, sample, max_features, config.class_weights, &mut rng)
        })
        .collect();
    Ok(ForestParams { trees, feature_count: x.cols() })
}

pub struct ForestFamily;

impl ModelFamily for ForestFamily {
    fn name(&self) -> &'static str {
        "rf"
    }

    fn display_name(&self) -> &'static str {
        "RandomForest"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["random-forest", "forest", "randomforest"]
    }

    fn default_hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::Forest(ForestConfig::default())
    }

    fn fit(&self, view: &DataView<'_>, hp: &Hyperparameters, seed: u64) -> Result<ModelArtifact, ModelError> {
        let Hyperparameters::Forest(cfg) = hp else {
            return Err(ModelError::Config(format!("{} hyperparameters given to rf", hp.kind())));
        };
        let (nodes, targets) = training_rows(view)?;
        let x = view.features_of(&nodes)?;
        let y: Vec<Class> = targets.into_iter().map(|t| t.expect("labelled rows only")).collect();
        let params = train_forest(&x, &y, cfg, seed)?;
        Ok(ModelArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            family: self.name().to_string(),
            hyperparameters: hp.clone(),
            seed,
            feature_count: x.cols(),
            trained_through: view.last_step(),
            loss_trace: Vec::new(),
            params: ModelParams::Forest(params),
        })
    }

    fn predict(&self, artifact: &ModelArtifact, view: &DataView<'_>) -> Result<Prediction, ModelError> {
        let p = expect_params(artifact, self.name(), |p| match p {
            ModelParams::Forest(f) => Some(f),
            _ => None,
        })?;
        let nodes = view.nodes();
        let probs = p.probs(&view.features_of(&nodes)?)?;
        Ok(Prediction { nodes, probs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64, gap: f64) -> (DenseMatrix, Vec<Class>) {
        let mut rng = RngStream::new(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = if i % 2 == 0 { Class::Illicit } else { Class::Licit };
            let m = if c == Class::Illicit { gap } else { 0.0 };
            rows.push(vec![m + rng.normal(), m + rng.normal(), rng.normal()]);
            y.push(c);
        }
        (DenseMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn gini_closed_forms() {
        assert_eq!(gini_impurity([2.0, 2.0]), 0.5);
        assert_eq!(split_gain([2.0, 2.0], [2.0, 0.0], [0.0, 2.0]), 0.5);
        assert_eq!(gini_impurity([3.0, 0.0]), 0.0);
    }

    #[test]
    fn single_full_tree_memorizes_even_xor() {
        let x = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let y = vec![Class::Licit, Class::Licit, Class::Illicit, Class::Illicit];
        let cfg = ForestConfig { estimators: 1, max_features: 2, bootstrap: false, class_weights: ClassWeights::UNIFORM };
        let f = train_forest(&x, &y, &cfg, 0).unwrap();
        let probs = f.probs(&x).unwrap();
        for (i, c) in y.iter().enumerate() {
            assert_eq!(Class::from_probs(probs.row(i)), *c);
        }

        let (x, y) = blobs(120, 3, 0.5);
        let cfg = ForestConfig { estimators: 1, max_features: 3, bootstrap: false, ..Default::default() };
        let f = train_forest(&x, &y, &cfg, 1).unwrap();
        let probs = f.probs(&x).unwrap();
        assert!(probs.as_slice().iter().all(|&p| p == 0.0 || p == 1.0));
        assert!((0..120).all(|i| Class::from_probs(probs.row(i)) == y[i]));
    }

    #[test]
    fn order_invariant_and_deterministic() {
        let (x, y) = blobs(80, 4, 1.5);
        let cfg = ForestConfig { estimators: 9, max_features: 2, ..Default::default() };
        let f = train_forest(&x, &y, &cfg, 5).unwrap();
        assert_eq!(f, train_forest(&x, &y, &cfg, 5).unwrap());
        let mut reversed = f.clone();
        reversed.trees.reverse();
        reversed.trees.swap(0, 4);
        assert_eq!(f.probs(&x).unwrap(), reversed.probs(&x).unwrap());
    }

    #[test]
    fn separates_gaussians() {
        let (x, y) = blobs(200, 6, 4.0);
        let (xt, yt) = blobs(200, 7, 4.0);
        let f = train_forest(&x, &y, &ForestConfig { estimators: 20, ..Default::default() }, 0).unwrap();
        let probs = f.probs(&xt).unwrap();
        let acc = (0..200).filter(|&i| Class::from_probs(probs.row(i)) == yt[i]).count() as f64 / 200.0;
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn leaf_counts_are_non_negative() {
        let (x, y) = blobs(60, 8, 1.0);
        let f = train_forest(&x, &y, &ForestConfig { estimators: 3, ..Default::default() }, 2).unwrap();
        for t in &f.trees {
            for n in &t.nodes {
                match n {
                    TreeNode::Leaf { counts } => assert!(counts[0] >= 0.0 && counts[1] >= 0.0),
                    TreeNode::Split { left, right, .. } => assert!(*left < t.nodes.len() && *right < t.nodes.len()),
                }
            }
        }
    }
}
