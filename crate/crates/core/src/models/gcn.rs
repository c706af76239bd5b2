//! Two-layer graph convolution, optionally with a linear skip path from
//! the input features to the output logits.
//!
//! `Z1 = ÂXW0`, `H1 = relu(Z1)`, `Z2 = ÂH1W1 [+ XWs]`, output `softmax(Z2)`.
//! Training propagates over the block-diagonal `Â` of the training steps;
//! prediction builds `Â` from whatever steps it is given and reuses the
//! weights, so unseen steps are handled inductively.

use serde::{Deserialize, Serialize};

use crate::label::{Class, ClassWeights};
use crate::numerics::{
    relu, relu_backward, softmax_rows, weighted_cross_entropy_with_logits, DenseMatrix, RngStream, SparseMatrix,
};

use super::{
    adam_train, check_positive, DataView, Hyperparameters, ModelArtifact, ModelError, ModelFamily, ModelParams,
    Prediction, ARTIFACT_FORMAT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnConfig {
    /// Embedding width `d`.
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub class_weights: ClassWeights,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self { hidden: 100, epochs: 1000, lr: 0.001, class_weights: ClassWeights::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    /// `F × d`.
    pub w0: DenseMatrix,
    /// `d × 2`.
    pub w1: DenseMatrix,
    /// `F × 2`, present for the skip variant.
    pub skip: Option<DenseMatrix>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct GcnForward {
    pub z1: DenseMatrix,
    pub h1: DenseMatrix,
    /// Pre-softmax output.
    pub z2: DenseMatrix,
}

impl GcnParams {
    pub fn new(features: usize, hidden: usize, skip: bool, rng: &mut RngStream) -> Self {
        let w0 = DenseMatrix::glorot(features, hidden, rng);
        let w1 = DenseMatrix::glorot(hidden, 2, rng);
        let skip = skip.then(|| DenseMatrix::glorot(features, 2, rng));
        Self { w0, w1, skip }
    }

    pub fn tensors(&self) -> Vec<DenseMatrix> {
        let mut t = vec![self.w0.clone(), self.w1.clone()];
        t.extend(self.skip.clone());
        t
    }

    pub fn from_tensors(mut t: Vec<DenseMatrix>) -> Self {
        let skip = if t.len() == 3 { t.pop() } else { None };
        let w1 = t.pop().expect("w1");
        let w0 = t.pop().expect("w0");
        Self { w0, w1, skip }
    }

    pub fn forward(&self, a: &SparseMatrix, x: &DenseMatrix) -> Result<GcnForward, ModelError> {
        let ax = a.spmm(x)?;
        forward(&self.tensors(), a, &ax, x)
    }
}

fn forward(
    params: &[DenseMatrix],
    a: &SparseMatrix,
    ax: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<GcnForward, ModelError> {
    let z1 = ax.matmul(&params[0])?;
    let h1 = relu(&z1);
    let mut z2 = a.spmm(&h1)?.matmul(&params[1])?;
    if let Some(ws) = params.get(2) {
        z2.add_assign(&x.matmul(ws)?)?;
    }
    Ok(GcnForward { z1, h1, z2 })
}

/// Loss and gradients for `[W0, W1]` or `[W0, W1, Ws]`. `a` must be
/// symmetric and `ax` equal to `a · x`.
pub fn gcn_loss_and_grad(
    params: &[DenseMatrix],
    a: &SparseMatrix,
    ax: &DenseMatrix,
    x: &DenseMatrix,
    targets: &[Option<Class>],
    weights: ClassWeights,
) -> Result<(f64, Vec<DenseMatrix>), ModelError> {
    let f = forward(params, a, ax, x)?;
    let (ce, g2) = weighted_cross_entropy_with_logits(&f.z2, targets, weights)?;
    let ah1 = a.spmm(&f.h1)?;
    let dw1 = ah1.t_matmul(&g2)?;
    let dh1 = a.spmm(&g2.matmul_t(&params[1])?)?;
    let dz1 = relu_backward(&dh1, &f.z1);
    let dw0 = ax.t_matmul(&dz1)?;
    let mut grads = vec![dw0, dw1];
    if params.len() == 3 {
        grads.push(x.t_matmul(&g2)?);
    }
    Ok((ce.loss, grads))
}

pub struct GcnFamily {
    pub skip: bool,
}

impl GcnFamily {
    fn params<'a>(&self, artifact: &'a ModelArtifact) -> Result<&'a GcnParams, ModelError> {
        match &artifact.params {
            ModelParams::Gcn(p) => Ok(p),
            _ => Err(ModelError::WrongFamily { expected: "gcn or skip-gcn".into(), found: artifact.family.clone() }),
        }
    }
}

/// Runs a (Skip-)GCN artifact over every node of `view`.
pub fn gcn_forward(artifact: &ModelArtifact, view: &DataView<'_>) -> Result<(Vec<usize>, GcnForward), ModelError> {
    let p = GcnFamily { skip: false }.params(artifact)?;
    if view.feature_count() != artifact.feature_count {
        return Err(ModelError::FeatureCount { expected: artifact.feature_count, found: view.feature_count() });
    }
    let nodes = view.nodes();
    let x = view.features_of(&nodes)?;
    let a = view.adjacency(&nodes)?;
    let f = p.forward(&a, &x)?;
    Ok((nodes, f))
}

/// Hidden-layer activations `relu(ÂXW0)`, one row per node of `view`.
pub fn extract_embeddings(artifact: &ModelArtifact, view: &DataView<'_>) -> Result<(Vec<usize>, DenseMatrix), ModelError> {
    gcn_forward(artifact, view).map(|(nodes, f)| (nodes, f.h1))
}

impl ModelFamily for GcnFamily {
    fn name(&self) -> &'static str {
        if self.skip { "skip-gcn" } else { "gcn" }
    }

    fn display_name(&self) -> &'static str {
        if self.skip { "Skip-GCN" } else { "GCN" }
    }

    fn aliases(&self) -> &'static [&'static str] {
        if self.skip { &["skipgcn", "skip_gcn"] } else { &[] }
    }

    fn uses_graph(&self) -> bool {
        true
    }

    fn default_hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::Gcn(GcnConfig::default())
    }

    fn fit(&self, view: &DataView<'_>, hp: &Hyperparameters, seed: u64) -> Result<ModelArtifact, ModelError> {
        let Hyperparameters::Gcn(cfg) = hp else {
            return Err(ModelError::Config(format!("{} hyperparameters given to {}", hp.kind(), self.name())));
        };
        check_positive("learning rate", cfg.lr)?;
        if cfg.hidden == 0 {
            return Err(ModelError::Config("embedding width must be positive".into()));
        }
        let nodes = view.nodes();
        let targets = view.labels_of(&nodes)?;
        check_classes(&targets)?;
        let x = view.features_of(&nodes)?;
        let a = view.adjacency(&nodes)?;
        let ax = a.spmm(&x)?;
        let mut rng = RngStream::new(seed).derive(0x40);
        let mut params = GcnParams::new(x.cols(), cfg.hidden, self.skip, &mut rng).tensors();
        let trace = adam_train(&mut params, cfg.epochs, cfg.lr, |p| {
            gcn_loss_and_grad(p, &a, &ax, &x, &targets, cfg.class_weights)
        })?;
        Ok(ModelArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            family: self.name().to_string(),
            hyperparameters: hp.clone(),
            seed,
            feature_count: x.cols(),
            trained_through: view.last_step(),
            loss_trace: trace,
            params: ModelParams::Gcn(GcnParams::from_tensors(params)),
        })
    }

    fn predict(&self, artifact: &ModelArtifact, view: &DataView<'_>) -> Result<Prediction, ModelError> {
        let (nodes, f) = gcn_forward(artifact, view)?;
        Ok(Prediction { nodes, probs: softmax_rows(&f.z2) })
    }
}

pub(crate) fn check_classes(targets: &[Option<Class>]) -> Result<(), ModelError> {
    let labelled = targets.iter().flatten().count();
    if labelled == 0 {
        return Err(ModelError::EmptyMask);
    }
    let illicit = targets.iter().filter(|t| **t == Some(Class::Illicit)).count();
    if illicit == 0 || illicit == labelled {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearParams;
    use crate::numerics::{grad_check, normalize_adjacency, GradCheckConfig};

    fn random_graph(n: usize, f: usize, seed: u64) -> (SparseMatrix, DenseMatrix, Vec<Option<Class>>) {
        let mut rng = RngStream::new(seed);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.bernoulli(0.25) {
                    triplets.push((i, j, 1.0));
                }
            }
        }
        let a = normalize_adjacency(&SparseMatrix::from_triplets(n, n, triplets).unwrap(), true).unwrap();
        let x = DenseMatrix::glorot(n, f, &mut rng).scale(3.0);
        let t = (0..n)
            .map(|i| match i % 3 {
                0 => Some(Class::Illicit),
                1 => Some(Class::Licit),
                _ => None,
            })
            .collect();
        (a, x, t)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for skip in [false, true] {
            let (a, x, t) = random_graph(10, 4, 1);
            let ax = a.spmm(&x).unwrap();
            let mut rng = RngStream::new(2);
            let params = GcnParams::new(4, 5, skip, &mut rng).tensors();
            let w = ClassWeights::default();
            let (_, g) = gcn_loss_and_grad(&params, &a, &ax, &x, &t, w).unwrap();
            let report = grad_check(
                |p| gcn_loss_and_grad(p, &a, &ax, &x, &t, w).unwrap().0,
                &params,
                &g,
                GradCheckConfig::default(),
            );
            assert!(report.max_rel_error < 1e-4, "skip={skip}: {report:?}");
        }
    }

    #[test]
    fn skip_gcn_with_zero_graph_weights_is_logistic_regression() {
        let (a, x, _) = random_graph(9, 3, 4);
        let mut rng = RngStream::new(5);
        let mut p = GcnParams::new(3, 6, true, &mut rng);
        p.w0 = DenseMatrix::zeros(3, 6);
        p.w1 = DenseMatrix::zeros(6, 2);
        let lr = LinearParams { weights: p.skip.clone().unwrap(), bias: DenseMatrix::zeros(1, 2) };
        let gcn = softmax_rows(&p.forward(&a, &x).unwrap().z2);
        assert_eq!(gcn, lr.probs(&x).unwrap());
    }

    #[test]
    fn embeddings_of_isolated_node_use_only_its_row() {
        let (_, x, _) = random_graph(4, 3, 6);
        let mut rng = RngStream::new(7);
        let p = GcnParams::new(3, 4, false, &mut rng);
        // node 3 isolated, others in a triangle
        let raw = SparseMatrix::from_triplets(4, 4, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let a = normalize_adjacency(&raw, true).unwrap();
        let h = p.forward(&a, &x).unwrap().h1;
        let own = relu(&x.select_rows(&[3]).matmul(&p.w0).unwrap());
        assert_eq!(h.row(3), own.row(0));

        let zero = GcnParams { w0: DenseMatrix::zeros(3, 4), ..p };
        assert_eq!(zero.forward(&a, &x).unwrap().h1.max_abs(), 0.0);
    }

    #[test]
    fn permuting_nodes_permutes_outputs() {
        let n = 8;
        let mut rng = RngStream::new(8);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.bernoulli(0.3) {
                    triplets.push((i, j, 1.0));
                }
            }
        }
        let x = DenseMatrix::glorot(n, 3, &mut rng);
        let p = GcnParams::new(3, 4, true, &mut rng);
        let perm = rng.sample_indices(n, n);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let pt: Vec<_> = triplets.iter().map(|&(i, j, v)| (inverse[i], inverse[j], v)).collect();
        let a = normalize_adjacency(&SparseMatrix::from_triplets(n, n, triplets).unwrap(), true).unwrap();
        let ap = normalize_adjacency(&SparseMatrix::from_triplets(n, n, pt).unwrap(), true).unwrap();
        let out = p.forward(&a, &x).unwrap().z2;
        let outp = p.forward(&ap, &x.select_rows(&perm)).unwrap().z2;
        for (new, &old) in perm.iter().enumerate() {
            for c in 0..2 {
                assert!((outp.get(new, c) - out.get(old, c)).abs() < 1e-12);
            }
        }
    }
}
