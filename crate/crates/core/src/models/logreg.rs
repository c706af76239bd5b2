//! Multinomial logistic regression: one softmax layer with bias.

use serde::{Deserialize, Serialize};

use crate::label::{Class, ClassWeights};
use crate::numerics::{softmax_rows, weighted_cross_entropy_with_logits, DenseMatrix, RngStream};

use super::{
    adam_train, check_positive, expect_params, training_rows, DataView, Hyperparameters, ModelArtifact, ModelError,
    ModelFamily, ModelParams, Prediction, ARTIFACT_FORMAT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Coefficient of `‖W‖² / 2`; the bias is not penalized.
    pub l2: f64,
    pub class_weights: ClassWeights,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self { epochs: 1000, lr: 0.01, l2: 1e-4, class_weights: ClassWeights::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    /// `F × 2`.
    pub weights: DenseMatrix,
    /// `1 × 2`.
    pub bias: DenseMatrix,
}

impl LinearParams {
    pub fn zeros(features: usize) -> Self {
        Self { weights: DenseMatrix::zeros(features, 2), bias: DenseMatrix::zeros(1, 2) }
    }

    pub fn logits(&self, x: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
        Ok(x.matmul(&self.weights)?.add_row_broadcast(&self.bias)?)
    }

    pub fn probs(&self, x: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
        Ok(softmax_rows(&self.logits(x)?))
    }
}

/// Loss and gradients for parameters `[W, b]`.
pub fn logreg_loss_and_grad(
    params: &[DenseMatrix],
    x: &DenseMatrix,
    targets: &[Option<Class>],
    weights: ClassWeights,
    l2: f64,
) -> Result<(f64, Vec<DenseMatrix>), ModelError> {
    let (w, b) = (&params[0], &params[1]);
    let logits = x.matmul(w)?.add_row_broadcast(b)?;
    let (ce, g) = weighted_cross_entropy_with_logits(&logits, targets, weights)?;
    let mut dw = x.t_matmul(&g)?;
    if l2 != 0.0 {
        dw.add_assign(&w.scale(l2))?;
    }
    let loss = ce.loss + 0.5 * l2 * w.frobenius_sq();
    Ok((loss, vec![dw, g.column_sums()]))
}

pub struct LogRegFamily;

impl ModelFamily for LogRegFamily {
    fn name(&self) -> &'static str {
        "logreg"
    }

    fn display_name(&self) -> &'static str {
        "Logistic Regr"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["lr", "logistic", "logistic-regression"]
    }

    fn default_hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::LogReg(LogRegConfig::default())
    }

    fn fit(&self, view: &DataView<'_>, hp: &Hyperparameters, seed: u64) -> Result<ModelArtifact, ModelError> {
        let Hyperparameters::LogReg(cfg) = hp else {
            return Err(ModelError::Config(format!("{} hyperparameters given to logreg", hp.kind())));
        };
        check_positive("learning rate", cfg.lr)?;
        if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
            return Err(ModelError::Config(format!("l2 must be non-negative, got {}", cfg.l2)));
        }
        let (nodes, targets) = training_rows(view)?;
        let x = view.features_of(&nodes)?;
        let mut rng = RngStream::new(seed).derive(0x10);
        let mut params = vec![DenseMatrix::glorot(x.cols(), 2, &mut rng), DenseMatrix::zeros(1, 2)];
        let trace = adam_train(&mut params, cfg.epochs, cfg.lr, |p| {
            logreg_loss_and_grad(p, &x, &targets, cfg.class_weights, cfg.l2)
        })?;
        let [weights, bias]: [DenseMatrix; 2] = params.try_into().expect("two tensors");
        Ok(ModelArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            family: self.name().to_string(),
            hyperparameters: hp.clone(),
            seed,
            feature_count: x.cols(),
            trained_through: view.last_step(),
            loss_trace: trace,
            params: ModelParams::Linear(LinearParams { weights, bias }),
        })
    }

    fn predict(&self, artifact: &ModelArtifact, view: &DataView<'_>) -> Result<Prediction, ModelError> {
        let p = expect_params(artifact, self.name(), |p| match p {
            ModelParams::Linear(l) => Some(l),
            _ => None,
        })?;
        let nodes = view.nodes();
        let probs = p.probs(&view.features_of(&nodes)?)?;
        Ok(Prediction { nodes, probs })
    }
}
