//! Gain application with padding so every input sample is reconstructed.

use ndarray::Array2;

use super::PipelineError;
use crate::octave::{band_gains_to_stft_gains, envelopes, BandLayout, EnvelopeMatrix, OutOfBandPolicy};
use crate::signal::TimeSignal;
use crate::stft::{apply_gain, Spectrogram, Stft, StftConfig};

/// A signal zero-padded so that each original sample lies strictly inside
/// at least two analysis frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedInput {
    pub samples: Vec<f64>,
    pub front: usize,
    pub original_len: usize,
}

impl PaddedInput {
    /// `extra_front_frames` additional hops of leading zeros give context
    /// windows something to look back on.
    pub fn new(samples: &[f64], config: &StftConfig, extra_front_frames: usize) -> Self {
        let front = config.hop * (1 + extra_front_frames);
        let frames = padded_frames(front + samples.len(), config);
        let total = config.span(frames);
        let mut padded = vec![0.0; total];
        padded[front..front + samples.len()].copy_from_slice(samples);
        Self {
            samples: padded,
            front,
            original_len: samples.len(),
        }
    }

    pub fn unpad(&self, processed: &[f64]) -> Vec<f64> {
        processed[self.front..self.front + self.original_len].to_vec()
    }
}

/// Frames needed so the last sample before `len` is followed by a full hop
/// of overlap-add support.
pub fn padded_frames(len: usize, config: &StftConfig) -> usize {
    let needed = len + config.hop;
    if needed <= config.window_len {
        1
    } else {
        (needed - config.window_len).div_ceil(config.hop) + 1
    }
}

/// Pads `noisy`, lets `gains` map its spectrogram to `frames x bins` gains,
/// applies them with the noisy phase, and returns a signal of the input's
/// length.
pub fn enhance_with_bin_gains<F>(
    noisy: &TimeSignal,
    stft: &Stft,
    extra_front_frames: usize,
    gains: F,
) -> Result<TimeSignal, PipelineError>
where
    F: FnOnce(&Spectrogram) -> Result<Array2<f64>, PipelineError>,
{
    let padded = PaddedInput::new(&noisy.samples, &stft.config(), extra_front_frames);
    let spec = stft.analyze(&padded.samples)?;
    let bin_gains = gains(&spec)?;
    let processed = stft.synthesize(&apply_gain(&spec, &bin_gains)?)?;
    Ok(TimeSignal::new(padded.unpad(&processed), noisy.sample_rate_hz))
}

/// As [`enhance_with_bin_gains`], with `bands x frames` gains computed from
/// the padded noisy envelopes and expanded uniformly over each band.
pub fn enhance_with_band_gains<F>(
    noisy: &TimeSignal,
    stft: &Stft,
    layout: &BandLayout,
    policy: OutOfBandPolicy,
    extra_front_frames: usize,
    gains: F,
) -> Result<TimeSignal, PipelineError>
where
    F: FnOnce(&Spectrogram, &EnvelopeMatrix) -> Result<Array2<f64>, PipelineError>,
{
    enhance_with_bin_gains(noisy, stft, extra_front_frames, |spec| {
        let env = envelopes(spec, layout)?;
        let band_gains = gains(spec, &env)?;
        Ok(band_gains_to_stft_gains(&band_gains, layout, policy)?)
    })
}

/// Ideal band gains `min(1, X / Y)`; zero where the noisy band is silent.
pub fn oracle_band_gains(clean: &EnvelopeMatrix, noisy: &EnvelopeMatrix) -> Result<Array2<f64>, PipelineError> {
    if clean.values.dim() != noisy.values.dim() {
        return Err(PipelineError::Invalid(format!(
            "clean envelopes {:?} vs noisy {:?}",
            clean.values.dim(),
            noisy.values.dim()
        )));
    }
    Ok(ndarray::Zip::from(&clean.values)
        .and(&noisy.values)
        .map_collect(|&x, &y| if y > 0.0 { (x / y).min(1.0) } else { 0.0 }))
}

/// Enhancement with ideal gains computed from the clean signal.
pub fn enhance_oracle(
    clean: &TimeSignal,
    noisy: &TimeSignal,
    stft: &Stft,
    layout: &BandLayout,
) -> Result<TimeSignal, PipelineError> {
    if clean.len() != noisy.len() {
        return Err(PipelineError::LengthMismatch(clean.len(), noisy.len()));
    }
    let padded_clean = PaddedInput::new(&clean.samples, &stft.config(), 0);
    let clean_env = envelopes(&stft.analyze(&padded_clean.samples)?, layout)?;
    enhance_with_band_gains(noisy, stft, layout, OutOfBandPolicy::Zero, 0, |_, noisy_env| {
        oracle_band_gains(&clean_env, noisy_env)
    })
}
