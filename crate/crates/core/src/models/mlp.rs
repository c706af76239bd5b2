//! One-hidden-layer perceptron with ReLU.

use serde::{Deserialize, Serialize};

use crate::label::{Class, ClassWeights};
use crate::numerics::{relu, relu_backward, softmax_rows, weighted_cross_entropy_with_logits, DenseMatrix, RngStream};

use super::{
    adam_train, check_positive, expect_params, training_rows, DataView, Hyperparameters, ModelArtifact, ModelError,
    ModelFamily, ModelParams, Prediction, ARTIFACT_FORMAT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Coefficient of `(‖W1‖² + ‖W2‖²) / 2`.
    pub l2: f64,
    pub class_weights: ClassWeights,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 50, epochs: 200, lr: 0.001, l2: 1e-4, class_weights: ClassWeights::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// `F × h`.
    pub w1: DenseMatrix,
    /// `1 × h`.
    pub b1: DenseMatrix,
    /// `h × 2`.
    pub w2: DenseMatrix,
    /// `1 × 2`.
    pub b2: DenseMatrix,
}

impl MlpParams {
    fn tensors(&self) -> [&DenseMatrix; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn probs(&self, x: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
        let [w1, b1, w2, b2] = self.tensors();
        let h = relu(&x.matmul(w1)?.add_row_broadcast(b1)?);
        Ok(softmax_rows(&h.matmul(w2)?.add_row_broadcast(b2)?))
    }
}

/// Loss and gradients for parameters `[W1, b1, W2, b2]`.
pub fn mlp_loss_and_grad(
    params: &[DenseMatrix],
    x: &DenseMatrix,
    targets: &[Option<Class>],
    weights: ClassWeights,
    l2: f64,
) -> Result<(f64, Vec<DenseMatrix>), ModelError> {
    let (w1, b1, w2, b2) = (&params[0], &params[1], &params[2], &params[3]);
    let z1 = x.matmul(w1)?.add_row_broadcast(b1)?;
    let h = relu(&z1);
    let z2 = h.matmul(w2)?.add_row_broadcast(b2)?;
    let (ce, g2) = weighted_cross_entropy_with_logits(&z2, targets, weights)?;
    let mut dw2 = h.t_matmul(&g2)?;
    let dz1 = relu_backward(&g2.matmul_t(w2)?, &z1);
    let mut dw1 = x.t_matmul(&dz1)?;
    if l2 != 0.0 {
        dw1.add_assign(&w1.scale(l2))?;
        dw2.add_assign(&w2.scale(l2))?;
    }
    let loss = ce.loss + 0.5 * l2 * (w1.frobenius_sq() + w2.frobenius_sq());
    Ok((loss, vec![dw1, dz1.column_sums(), dw2, g2.column_sums()]))
}

pub struct MlpFamily;

impl ModelFamily for MlpFamily {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn display_name(&self) -> &'static str {
        "MLP"
    }

    fn default_hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::Mlp(MlpConfig::default())
    }

    fn fit(&self, view: &DataView<'_>, hp: &Hyperparameters, seed: u64) -> Result<ModelArtifact, ModelError> {
        let Hyperparameters::Mlp(cfg) = hp else {
            return Err(ModelError::Config(format!("{} hyperparameters given to mlp", hp.kind())));
        };
        check_positive("learning rate", cfg.lr)?;
        if cfg.hidden == 0 {
            return Err(ModelError::Config("hidden width must be positive".into()));
        }
        let (nodes, targets) = training_rows(view)?;
        let x = view.features_of(&nodes)?;
        let mut rng = RngStream::new(seed).derive(0x20);
        let mut params = vec![
            DenseMatrix::glorot(x.cols(), cfg.hidden, &mut rng),
            DenseMatrix::zeros(1, cfg.hidden),
            DenseMatrix::glorot(cfg.hidden, 2, &mut rng),
            DenseMatrix::zeros(1, 2),
        ];
        let trace = adam_train(&mut params, cfg.epochs, cfg.lr, |p| {
            mlp_loss_and_grad(p, &x, &targets, cfg.class_weights, cfg.l2)
        })?;
        let [w1, b1, w2, b2]: [DenseMatrix; 4] = params.try_into().expect("four tensors");
        Ok(ModelArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            family: self.name().to_string(),
            hyperparameters: hp.clone(),
            seed,
            feature_count: x.cols(),
            trained_through: view.last_step(),
            loss_trace: trace,
            params: ModelParams::Mlp(MlpParams { w1, b1, w2, b2 }),
        })
    }

    fn predict(&self, artifact: &ModelArtifact, view: &DataView<'_>) -> Result<Prediction, ModelError> {
        let p = expect_params(artifact, self.name(), |p| match p {
            ModelParams::Mlp(m) => Some(m),
            _ => None,
        })?;
        let nodes = view.nodes();
        let probs = p.probs(&view.features_of(&nodes)?)?;
        Ok(Prediction { nodes, probs })
    }
}
