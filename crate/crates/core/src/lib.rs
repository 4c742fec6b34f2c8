//! Speech enhancement by networks that maximize the envelope linear
//! correlation of one-third-octave band temporal envelopes.

pub mod binfmt;
pub mod config;
pub mod cost;
pub mod features;
pub mod mixing;
pub mod neural;
pub mod octave;
pub mod pipeline;
pub mod signal;
pub mod stft;
pub mod verify;

pub use cost::{elc, elc_grad, elc_grad_norm, emse, emse_grad, CostError};
pub use mixing::{DatasetSample, EnvelopeDataset, MixError, MixSpec, Split};
pub use neural::{MlpModel, NeuralError, Objective, TrainConfig, TrainReport};
pub use octave::{BandLayout, EnvelopeMatrix, EnvelopeVector, GainVector, CONTEXT_FRAMES, NUM_BANDS};
pub use pipeline::{EnhancementSystem, EvalRow, PipelineError};
pub use signal::{SignalError, TimeSignal, WORKING_RATE_HZ};
pub use stft::{Spectrogram, StftConfig};
