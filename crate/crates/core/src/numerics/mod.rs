//! Deterministic numerical core: dense and CSR matrices, the normalized
//! adjacency operator, activations, weighted cross entropy, Adam, finite
//! difference gradient checks and PCA.

mod activation;
mod adam;
pub(crate) mod dense;
mod gradcheck;
mod loss;
mod pca;
mod rng;
mod sparse;

pub use activation::{relu, relu_backward, sigmoid, softmax_rows};
pub use adam::{AdamConfig, AdamState};
pub use dense::{dot, DenseMatrix};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use loss::{weighted_cross_entropy, weighted_cross_entropy_with_logits, CrossEntropy, PROB_FLOOR};
pub use pca::{pca_fit, pca_project, PcaFit};
pub use rng::RngStream;
pub use sparse::{normalize_adjacency, SparseMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("loss mask selects no labelled rows")]
    EmptyMask,
}
