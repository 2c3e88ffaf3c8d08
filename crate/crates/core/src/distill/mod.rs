//! Distilling pseudo-labels into a compact multi-label classifier.

mod curve;
mod encoder;
mod loss;
mod model;
mod train;

use thiserror::Error;

use crate::evalkit::EvalError;
use crate::taxonomy::TaxonomyError;

pub use curve::{learning_curve, predict_labels, subset_indices, CurvePoint};
pub use encoder::{Encoder, HashedNgramEncoder, SparseFeatures};
pub use loss::{bce_grad, bce_loss, sigmoid, softplus};
pub use model::{predict, predict_vector, ModelHeader, TrainedModel, DEFAULT_THRESHOLD, FORMAT_VERSION, MAGIC};
pub use train::{
    build_examples, manifest_hash, steps_to_loss, train, AdamWConfig, EncodedExample, LogRecord, TrainConfig,
    Trainer,
};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("no corpus text for labeled study {0}")]
    MissingText(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("model format: {0}")]
    ModelFormat(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
