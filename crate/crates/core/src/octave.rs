//! One-third-octave band layout over STFT bins, band envelopes, envelope
//! vector framing, and the mapping from band gains back to per-bin gains.

use ndarray::Array2;
use thiserror::Error;

use crate::stft::Spectrogram;

pub const NUM_BANDS: usize = 15;
pub const FIRST_CENTER_HZ: f64 = 150.0;
/// Frames per short-time envelope vector (384 ms at a 12.8 ms hop).
pub const CONTEXT_FRAMES: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum OctaveError {
    #[error("band {band} ({lower_hz:.1}-{upper_hz:.1} Hz) contains no STFT bin")]
    EmptyBand {
        band: usize,
        lower_hz: f64,
        upper_hz: f64,
    },
    #[error("band layout reaches bin {needed} but the spectrogram has {available} bins")]
    BinRange { needed: usize, available: usize },
    #[error("frame {frame} has fewer than {context} frames of context")]
    InsufficientContext { frame: usize, context: usize },
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("frame {0} is not covered by any gain vector")]
    Uncovered(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub center_hz: f64,
    pub lower_hz: f64,
    pub upper_hz: f64,
    /// First bin of the band.
    pub k1: usize,
    /// One past the last bin of the band.
    pub k2: usize,
}

impl Band {
    pub fn bins(&self) -> std::ops::Range<usize> {
        self.k1..self.k2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandLayout {
    pub bands: Vec<Band>,
    pub fft_size: usize,
    pub sample_rate_hz: u32,
}

impl BandLayout {
    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    /// Number of single-sided bins of the underlying transform.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Band owning `bin`, if any.
    pub fn band_of_bin(&self, bin: usize) -> Option<usize> {
        self.bands.iter().position(|b| b.bins().contains(&bin))
    }
}

/// Default layout: 15 bands from 150 Hz.
pub fn build_band_layout(fft_size: usize, sample_rate_hz: u32) -> Result<BandLayout, OctaveError> {
    build_band_layout_with(fft_size, sample_rate_hz, NUM_BANDS, FIRST_CENTER_HZ)
}

/// Bands centred at `first_center_hz * 2^(j/3)` with edges at `center * 2^(+-1/6)`.
/// Bin `k` (centre `k * fs / K`) belongs to band `j` iff `lower <= f < upper`.
pub fn build_band_layout_with(
    fft_size: usize,
    sample_rate_hz: u32,
    num_bands: usize,
    first_center_hz: f64,
) -> Result<BandLayout, OctaveError> {
    let bin_hz = sample_rate_hz as f64 / fft_size as f64;
    let num_bins = fft_size / 2 + 1;
    let mut bands = Vec::with_capacity(num_bands);
    for j in 0..num_bands {
        let center_hz = first_center_hz * 2f64.powf(j as f64 / 3.0);
        let lower_hz = center_hz * 2f64.powf(-1.0 / 6.0);
        let upper_hz = center_hz * 2f64.powf(1.0 / 6.0);
        let k1 = (0..num_bins).find(|&k| k as f64 * bin_hz >= lower_hz);
        let k2 = (0..num_bins)
            .find(|&k| k as f64 * bin_hz >= upper_hz)
            .unwrap_or(num_bins);
        match k1 {
            Some(k1) if k1 < k2 => bands.push(Band {
                center_hz,
                lower_hz,
                upper_hz,
                k1,
                k2,
            }),
            _ => {
                return Err(OctaveError::EmptyBand {
                    band: j,
                    lower_hz,
                    upper_hz,
                })
            }
        }
    }
    Ok(BandLayout {
        bands,
        fft_size,
        sample_rate_hz,
    })
}

/// Band amplitudes, `bands x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeMatrix {
    pub values: Array2<f64>,
}

impl EnvelopeMatrix {
    pub fn num_bands(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Root-sum-square of each band's magnitudes, per frame.
pub fn envelopes(spec: &Spectrogram, layout: &BandLayout) -> Result<EnvelopeMatrix, OctaveError> {
    let needed = layout.bands.last().map_or(0, |b| b.k2);
    if needed > spec.num_bins() {
        return Err(OctaveError::BinRange {
            needed,
            available: spec.num_bins(),
        });
    }
    let frames = spec.num_frames();
    let mut values = Array2::zeros((layout.num_bands(), frames));
    for (j, band) in layout.bands.iter().enumerate() {
        for m in 0..frames {
            let power: f64 = band
                .bins()
                .map(|k| spec.magnitude[[m, k]] * spec.magnitude[[m, k]])
                .sum();
            values[[j, m]] = power.sqrt();
        }
    }
    Ok(EnvelopeMatrix { values })
}

/// Short-time temporal envelope of one band, ending at `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeVector {
    pub values: Vec<f64>,
    pub band: usize,
    /// Last frame covered.
    pub frame: usize,
}

impl std::ops::Deref for EnvelopeVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Per-frame band gains estimated for the frames of one envelope vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector {
    pub values: Vec<f64>,
    pub band: usize,
    /// Last frame covered; entry `i` refers to frame `frame + 1 - len + i`.
    pub frame: usize,
}

pub fn frame_envelope(
    env: &EnvelopeMatrix,
    band: usize,
    frame: usize,
    context: usize,
) -> Result<EnvelopeVector, OctaveError> {
    if band >= env.num_bands() || frame >= env.num_frames() {
        return Err(OctaveError::OutOfRange(format!(
            "band {band}, frame {frame} in a {}x{} envelope matrix",
            env.num_bands(),
            env.num_frames()
        )));
    }
    if context == 0 || frame + 1 < context {
        return Err(OctaveError::InsufficientContext { frame, context });
    }
    let start = frame + 1 - context;
    Ok(EnvelopeVector {
        values: (start..=frame).map(|m| env.values[[band, m]]).collect(),
        band,
        frame,
    })
}

/// What bins outside every band receive when band gains are expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfBandPolicy {
    #[default]
    Zero,
    PassThrough,
}

/// Expands `bands x frames` gains to a `frames x bins` matrix, uniform within
/// each band.
pub fn band_gains_to_stft_gains(
    band_gains: &Array2<f64>,
    layout: &BandLayout,
    policy: OutOfBandPolicy,
) -> Result<Array2<f64>, OctaveError> {
    if band_gains.nrows() != layout.num_bands() {
        return Err(OctaveError::Shape(format!(
            "{} gain rows for {} bands",
            band_gains.nrows(),
            layout.num_bands()
        )));
    }
    let frames = band_gains.ncols();
    let fill = match policy {
        OutOfBandPolicy::Zero => 0.0,
        OutOfBandPolicy::PassThrough => 1.0,
    };
    let mut gains = Array2::from_elem((frames, layout.num_bins()), fill);
    for (j, band) in layout.bands.iter().enumerate() {
        for m in 0..frames {
            let g = band_gains[[j, m]];
            for k in band.bins() {
                gains[[m, k]] = g;
            }
        }
    }
    Ok(gains)
}

/// Mean of all gain-vector entries referring to each of `num_frames` frames.
/// Entries are accumulated in the order given.
pub fn average_overlapping_gains(
    vectors: &[GainVector],
    num_frames: usize,
) -> Result<Vec<f64>, OctaveError> {
    let mut sum = vec![0.0; num_frames];
    let mut count = vec![0usize; num_frames];
    for v in vectors {
        let len = v.values.len();
        if v.frame + 1 < len || v.frame >= num_frames {
            return Err(OctaveError::OutOfRange(format!(
                "gain vector of length {len} ending at frame {} with {num_frames} frames",
                v.frame
            )));
        }
        let start = v.frame + 1 - len;
        for (i, &g) in v.values.iter().enumerate() {
            sum[start + i] += g;
            count[start + i] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .enumerate()
        .map(|(m, (&s, &c))| {
            if c == 0 {
                Err(OctaveError::Uncovered(m))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}
