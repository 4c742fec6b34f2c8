//! End-to-end enhancement, scoring, gain correlation, the spectral-MSE
//! baseline, and result tables.

mod baseline;
mod enhance;
mod report;
mod score;
mod system;

use thiserror::Error;

pub use baseline::{
    train_classical, ClassicalSettings, ClassicalSystem, SpectralDataset, SpectralTrainingData, BASELINE_CONTEXT_IN,
    BASELINE_CONTEXT_OUT,
};
pub use enhance::{enhance_oracle, enhance_with_band_gains, enhance_with_bin_gains, oracle_band_gains, padded_frames, PaddedInput};
pub use report::{evaluate_system, report_tables, EvalRow, TableFormat, TestItem};
pub use score::{gain_correlation, score_approx_stoi, score_elc, score_elc_detailed, ScoreDetail};
pub use system::{train_system, BandModels, EnhancementSystem, SystemSettings, SYSTEM_MAGIC, SYSTEM_VERSION};

use crate::binfmt::FormatError;
use crate::cost::CostError;
use crate::mixing::MixError;
use crate::neural::NeuralError;
use crate::octave::OctaveError;
use crate::signal::SignalError;
use crate::stft::StftError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input too short: {available} samples, need at least {needed}")]
    TooShort { needed: usize, available: usize },
    #[error("signal lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every envelope window was degenerate ({0} skipped)")]
    AllDegenerate(usize),
    #[error("systems are not comparable: {0}")]
    ConfigMismatch(String),
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("i/o error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    Octave(#[from] OctaveError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Cost(#[from] CostError),
}
