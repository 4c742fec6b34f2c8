//! Intelligibility scores: the mean envelope linear correlation over every
//! band and full envelope window, and the correlation between the gains of
//! two systems.

use std::collections::BTreeMap;

use super::system::EnhancementSystem;
use super::PipelineError;
use crate::cost::{self, CostError};
use crate::octave::{build_band_layout, envelopes, CONTEXT_FRAMES};
use crate::signal::TimeSignal;
use crate::stft::{Stft, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreDetail {
    pub mean: f64,
    /// Windows that contributed.
    pub counted: usize,
    /// Windows where either centred envelope was degenerate.
    pub skipped: usize,
}

/// Mean ELC over all `(band, frame)` windows of the default analysis.
pub fn score_elc_detailed(clean: &TimeSignal, processed: &TimeSignal) -> Result<ScoreDetail, PipelineError> {
    if clean.len() != processed.len() {
        return Err(PipelineError::LengthMismatch(clean.len(), processed.len()));
    }
    let config = StftConfig::default();
    let stft = Stft::new(config)?;
    let layout = build_band_layout(config.fft_size, clean.sample_rate_hz)?;
    let n = CONTEXT_FRAMES;
    let frames = config.num_frames(clean.len());
    if frames < n {
        return Err(PipelineError::TooShort {
            needed: config.span(n),
            available: clean.len(),
        });
    }
    let x = envelopes(&stft.analyze(&clean.samples)?, &layout)?;
    let y = envelopes(&stft.analyze(&processed.samples)?, &layout)?;
    let (mut sum, mut counted, mut skipped) = (0.0, 0usize, 0usize);
    for j in 0..layout.num_bands() {
        let xr = x.values.row(j);
        let yr = y.values.row(j);
        let (xs, ys) = (xr.as_slice().expect("row"), yr.as_slice().expect("row"));
        for m in n - 1..frames {
            match cost::elc(&xs[m + 1 - n..=m], &ys[m + 1 - n..=m]) {
                Ok(v) => {
                    sum += v;
                    counted += 1;
                }
                Err(CostError::ZeroVariance { .. }) => skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
    if counted == 0 {
        return Err(PipelineError::AllDegenerate(skipped));
    }
    Ok(ScoreDetail {
        mean: sum / counted as f64,
        counted,
        skipped,
    })
}

pub fn score_elc(clean: &TimeSignal, processed: &TimeSignal) -> Result<f64, PipelineError> {
    Ok(score_elc_detailed(clean, processed)?.mean)
}

/// Clip-free approximate STOI. It is the same average correlation as
/// [`score_elc`]; both names exist so tables can report either column.
pub fn score_approx_stoi(clean: &TimeSignal, processed: &TimeSignal) -> Result<f64, PipelineError> {
    score_elc(clean, processed)
}

/// Pearson correlation between all gain-vector entries of two systems on the
/// same noisy inputs, per noise type (sorted by name).
pub fn gain_correlation(
    a: &EnhancementSystem,
    b: &EnhancementSystem,
    items: &[(String, TimeSignal)],
) -> Result<Vec<(String, f64)>, PipelineError> {
    if a.layout != b.layout || a.stft != b.stft || a.context != b.context {
        return Err(PipelineError::ConfigMismatch(
            "band layout, STFT settings, or context differ".into(),
        ));
    }
    let stft = Stft::new(a.stft)?;
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (noise, noisy) in items {
        let env = envelopes(&stft.analyze(&noisy.samples)?, &a.layout)?;
        let entry = groups.entry(noise.as_str()).or_default();
        for g in a.window_gains(&env)? {
            entry.0.extend(g.iter());
        }
        for g in b.window_gains(&env)? {
            entry.1.extend(g.iter());
        }
    }
    groups
        .into_iter()
        .map(|(noise, (ga, gb))| Ok((noise.to_string(), cost::elc(&ga, &gb)?)))
        .collect()
}
