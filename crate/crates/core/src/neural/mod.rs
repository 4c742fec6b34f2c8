//! Feed-forward gain estimators: forward and backward passes with batch
//! normalization, objectives coupled through `x^ = g * y`, SGD training,
//! and model files.

mod format;
mod gradcheck;
mod loss;
mod mlp;
mod train;

use thiserror::Error;

pub use format::{
    decode_model, encode_model, load_model, load_model_checked, save_model, MODEL_MAGIC, MODEL_VERSION,
};
pub use gradcheck::{check_gradients, relative_error, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use loss::{batch_loss, loss_gradients, BatchLoss, LossSpec, Objective};
pub use mlp::{
    Activation, BatchNorm, Dense, ForwardCache, Gradients, MlpModel, ModelShape, Mode,
    BATCH_NORM_EPS, BATCH_NORM_MOMENTUM,
};
pub use train::{
    default_lr, evaluate, train, Batch, DenseData, EpochRecord, LrSchedule, Step, StopReason,
    TrainConfig, TrainReport, TrainingData,
};

use crate::binfmt::FormatError;
use crate::cost::CostError;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite network input")]
    NonFiniteInput,
    #[error("non-finite loss or gradient in epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Format(#[from] FormatError),
}
