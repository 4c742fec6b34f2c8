//! Noisy mixtures at exact SNRs, noise synthesis, pseudo-speech, and
//! envelope datasets.

mod dataset;
mod manifest;
mod noise;
mod p56;
mod speech;

use thiserror::Error;

pub use dataset::{
    build_dataset, dataset_from_mixtures, envelope_pair, mix_corpus, BandTarget, BandTrainingData, DatasetPlan,
    DatasetSample, EnvelopeDataset, MixSpec, MixedUtterance, SnrPlan, Split, UtteranceEnvelopes, PACK_MAGIC,
    PACK_VERSION, TRAIN_SNR_RANGE_DB,
};
pub use manifest::{load_manifest, parse_manifest, read_manifest, write_manifest};
pub use noise::{
    measured_snr_db, mix_at_snr, split_noise, synth_babble, synth_ssn, welch_psd, Mixture, DEFAULT_BABBLE_SPEAKERS,
    MIN_SSN_REFERENCE_S, SSN_FIR_TAPS,
};
pub use p56::{active_speech_level, overall_level_db, HANGOVER_S, MARGIN_DB, TIME_CONSTANT_S};
pub use speech::{pseudo_speech, pseudo_speech_corpus, SpeechParams};

use crate::binfmt::FormatError;
use crate::octave::OctaveError;
use crate::signal::SignalError;
use crate::stft::StftError;

#[derive(Debug, Error)]
pub enum MixError {
    #[error("{what} too short: need {needed} samples, have {available}")]
    TooShort {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("{0} is silent")]
    Silent(&'static str),
    #[error("non-finite samples")]
    NonFinite,
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("need {needed_s} s of reference speech, have {available_s:.1} s")]
    InsufficientReference { needed_s: f64, available_s: f64 },
    #[error("need {needed} distinct reference streams, have {available}")]
    InsufficientStreams { needed: usize, available: usize },
    #[error("invalid setting: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("i/o error on {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    Octave(#[from] OctaveError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Independent per-item seed (splitmix64 finalizer of `seed + index`).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
