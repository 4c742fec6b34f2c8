//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frame `m` covers samples `[m * hop, m * hop + window_len)` with no
//! pre-padding. Synthesis divides the overlap-added, synthesis-windowed
//! frames by the summed squared window, so `synthesize(analyze(s))`
//! reproduces `s` wherever that sum is non-zero.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::signal::TimeSignal;

/// Below this summed squared window weight a synthesized sample is left at zero.
const MIN_OLA_WEIGHT: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum StftError {
    #[error("invalid STFT configuration: {0}")]
    Config(String),
    #[error("signal of {len} samples is shorter than one {window}-sample window")]
    TooShort { len: usize, window: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("gain at frame {frame}, bin {bin} is {value}; gains must be finite and non-negative")]
    BadGain { frame: usize, bin: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    /// 256-point transform, 25.6 ms window, 12.8 ms hop at 10 kHz.
    fn default() -> Self {
        Self {
            fft_size: 256,
            window_len: 256,
            hop: 128,
        }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, window_len: usize, hop: usize) -> Result<Self, StftError> {
        let cfg = Self {
            fft_size,
            window_len,
            hop,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), StftError> {
        if self.window_len == 0 || self.fft_size == 0 || self.hop == 0 {
            return Err(StftError::Config("sizes must be positive".into()));
        }
        if self.window_len > self.fft_size {
            return Err(StftError::Config(format!(
                "window {} longer than FFT size {}",
                self.window_len, self.fft_size
            )));
        }
        if self.fft_size % 2 != 0 {
            return Err(StftError::Config("FFT size must be even".into()));
        }
        if self.window_len % 2 != 0 || self.hop * 2 != self.window_len {
            return Err(StftError::Config(format!(
                "hop {} must be half the window length {}",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `floor((len - window_len) / hop) + 1`, or zero for short signals.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    /// Samples spanned by `frames` frames.
    pub fn span(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.window_len
        }
    }
}

/// Periodic (DFT-even) Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Single-sided magnitude and phase, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitude: Array2<f64>,
    pub phase: Array2<f64>,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.magnitude.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.magnitude.ncols()
    }

    pub fn zeros(frames: usize, config: StftConfig) -> Self {
        Self {
            magnitude: Array2::zeros((frames, config.num_bins())),
            phase: Array2::zeros((frames, config.num_bins())),
            config,
        }
    }

    fn check_shape(&self) -> Result<(), StftError> {
        if self.magnitude.dim() != self.phase.dim() {
            return Err(StftError::Shape(format!(
                "magnitude {:?} vs phase {:?}",
                self.magnitude.dim(),
                self.phase.dim()
            )));
        }
        if self.magnitude.ncols() != self.config.num_bins() {
            return Err(StftError::Shape(format!(
                "{} bins, configuration expects {}",
                self.magnitude.ncols(),
                self.config.num_bins()
            )));
        }
        Ok(())
    }
}

/// Reusable FFT plans and window for one configuration.
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self, StftError> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window: hann(config.window_len),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn analyze(&self, samples: &[f64]) -> Result<Spectrogram, StftError> {
        let cfg = self.config;
        let frames = cfg.num_frames(samples.len());
        if frames == 0 {
            return Err(StftError::TooShort {
                len: samples.len(),
                window: cfg.window_len,
            });
        }
        let bins = cfg.num_bins();
        let mut spec = Spectrogram::zeros(frames, cfg);
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
        for m in 0..frames {
            let start = m * cfg.hop;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (n, (&x, &w)) in samples[start..start + cfg.window_len]
                .iter()
                .zip(&self.window)
                .enumerate()
            {
                buf[n].re = x * w;
            }
            self.forward.process(&mut buf);
            for k in 0..bins {
                spec.magnitude[[m, k]] = buf[k].norm();
                spec.phase[[m, k]] = buf[k].arg();
            }
        }
        Ok(spec)
    }

    /// Inverse transform of every frame followed by weighted overlap-add.
    pub fn synthesize(&self, spec: &Spectrogram) -> Result<Vec<f64>, StftError> {
        spec.check_shape()?;
        let cfg = self.config;
        if spec.config != cfg {
            return Err(StftError::Shape("spectrogram configuration differs".into()));
        }
        let frames = spec.num_frames();
        let len = cfg.span(frames);
        let mut out = vec![0.0; len];
        let mut weight = vec![0.0; len];
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
        let k_half = cfg.fft_size / 2;
        let scale = 1.0 / cfg.fft_size as f64;
        for m in 0..frames {
            for k in 0..=k_half {
                buf[k] = Complex::from_polar(spec.magnitude[[m, k]], spec.phase[[m, k]]);
            }
            // DC and Nyquist bins of a real frame are real
            buf[0].im = 0.0;
            buf[k_half].im = 0.0;
            for k in 1..k_half {
                buf[cfg.fft_size - k] = buf[k].conj();
            }
            self.inverse.process(&mut buf);
            let start = m * cfg.hop;
            for (n, &w) in self.window.iter().enumerate() {
                out[start + n] += buf[n].re * scale * w;
                weight[start + n] += w * w;
            }
        }
        for (o, &w) in out.iter_mut().zip(&weight) {
            *o = if w > MIN_OLA_WEIGHT { *o / w } else { 0.0 };
        }
        Ok(out)
    }
}

/// One-shot analysis of a signal.
pub fn analyze(signal: &TimeSignal, config: &StftConfig) -> Result<Spectrogram, StftError> {
    Stft::new(*config)?.analyze(&signal.samples)
}

/// One-shot synthesis at the signal's working rate.
pub fn synthesize(spec: &Spectrogram) -> Result<TimeSignal, StftError> {
    let samples = Stft::new(spec.config)?.synthesize(spec)?;
    Ok(TimeSignal::working(samples))
}

/// Multiplies magnitudes elementwise by `gains` (frames x bins); phase is kept.
pub fn apply_gain(spec: &Spectrogram, gains: &Array2<f64>) -> Result<Spectrogram, StftError> {
    spec.check_shape()?;
    if gains.dim() != spec.magnitude.dim() {
        return Err(StftError::Shape(format!(
            "gains {:?} vs spectrogram {:?}",
            gains.dim(),
            spec.magnitude.dim()
        )));
    }
    if let Some(((frame, bin), &value)) = gains
        .indexed_iter()
        .find(|(_, g)| !g.is_finite() || **g < 0.0)
    {
        return Err(StftError::BadGain { frame, bin, value });
    }
    Ok(Spectrogram {
        magnitude: &spec.magnitude * gains,
        phase: spec.phase.clone(),
        config: spec.config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(K^2) DFT of a windowed frame; independent of rustfft.
    fn direct_dft_magnitudes(frame: &[f64], k_size: usize) -> Vec<f64> {
        (0..=k_size / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * n) as f64 / k_size as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn random_signal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn config_rules() {
        assert!(StftConfig::default().validate().is_ok());
        assert!(StftConfig::new(256, 256, 64).is_err());
        assert!(StftConfig::new(128, 256, 128).is_err());
        assert_eq!(StftConfig::default().num_frames(255), 0);
        assert_eq!(StftConfig::default().num_frames(256), 1);
        assert_eq!(StftConfig::default().num_frames(1000), (1000 - 256) / 128 + 1);
    }

    #[test]
    fn dc_frame_matches_direct_dft() {
        let cfg = StftConfig::default();
        let spec = analyze(&TimeSignal::working(vec![1.0; 256]), &cfg).unwrap();
        assert_eq!(spec.num_frames(), 1);
        let expected = direct_dft_magnitudes(&hann(256), 256);
        // sum of the 256-point periodic Hann window
        assert!((expected[0] - 128.0).abs() < 1e-9);
        for k in 0..cfg.num_bins() {
            assert!((spec.magnitude[[0, k]] - expected[k]).abs() < 1e-9, "bin {k}");
        }
        assert!((spec.magnitude[[0, 0]] - 128.0).abs() < 1e-9);
    }

    #[test]
    fn bin_centred_sine_has_single_dominant_bin() {
        let cfg = StftConfig::default();
        let x: Vec<f64> = (0..2048)
            .map(|n| (2.0 * PI * 1250.0 * n as f64 / 10_000.0).sin())
            .collect();
        let spec = analyze(&TimeSignal::working(x.clone()), &cfg).unwrap();
        for m in 0..spec.num_frames() {
            let row = spec.magnitude.row(m);
            let (best, _) = row
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            assert_eq!(best, 32, "frame {m}");
            let frame: Vec<f64> = x[m * 128..m * 128 + 256]
                .iter()
                .zip(hann(256))
                .map(|(a, w)| a * w)
                .collect();
            let direct = direct_dft_magnitudes(&frame, 256);
            for k in 0..cfg.num_bins() {
                assert!((row[k] - direct[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let cfg = StftConfig::default();
        let spec = analyze(&TimeSignal::working(vec![0.0; 1000]), &cfg).unwrap();
        assert!(spec.magnitude.iter().all(|&v| v == 0.0));
        let z = Spectrogram::zeros(5, cfg);
        assert!(synthesize(&z).unwrap().samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_rejected() {
        let err = analyze(&TimeSignal::working(vec![0.0; 100]), &StftConfig::default());
        assert_eq!(err.unwrap_err(), StftError::TooShort { len: 100, window: 256 });
    }

    #[test]
    fn interior_reconstruction() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_signal(&mut rng, 3000);
        let spec = analyze(&TimeSignal::working(x.clone()), &cfg).unwrap();
        let y = synthesize(&spec).unwrap().samples;
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let covered = cfg.span(spec.num_frames());
        for n in cfg.hop..covered - cfg.hop {
            assert!((y[n] - x[n]).abs() <= 1e-10 * peak, "sample {n}");
        }
    }

    #[test]
    fn synthesis_is_linear_in_magnitude() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_signal(&mut rng, 1500);
        let spec = analyze(&TimeSignal::working(x), &cfg).unwrap();
        let base = synthesize(&spec).unwrap().samples;
        let mut scaled = spec.clone();
        scaled.magnitude *= 2.5;
        let out = synthesize(&scaled).unwrap().samples;
        for (a, b) in base.iter().zip(&out).skip(cfg.hop).take(out.len() - 2 * cfg.hop) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_signal(&mut rng, 1024);
        let spec = analyze(&TimeSignal::working(x.clone()), &cfg).unwrap();
        let w = hann(256);
        for m in 0..spec.num_frames() {
            let time: f64 = x[m * 128..m * 128 + 256]
                .iter()
                .zip(&w)
                .map(|(a, b)| (a * b).powi(2))
                .sum();
            let row = spec.magnitude.row(m);
            let mut freq = row[0].powi(2) + row[128].powi(2);
            for k in 1..128 {
                freq += 2.0 * row[k].powi(2);
            }
            freq /= 256.0;
            assert!(((freq - time) / time).abs() < 1e-9);
        }
    }

    #[test]
    fn analysis_is_positively_homogeneous() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_signal(&mut rng, 800);
        let a = analyze(&TimeSignal::working(x.clone()), &cfg).unwrap();
        let b = analyze(&TimeSignal::working(x.iter().map(|v| 3.0 * v).collect()), &cfg).unwrap();
        for ((ma, mb), (pa, pb)) in a
            .magnitude
            .iter()
            .zip(&b.magnitude)
            .zip(a.phase.iter().zip(&b.phase))
        {
            assert!((3.0 * ma - mb).abs() <= 1e-12 * mb.max(1.0));
            if *ma > 1e-9 {
                assert!((pa - pb).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gain_application() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = analyze(&TimeSignal::working(random_signal(&mut rng, 900)), &cfg).unwrap();
        let dim = spec.magnitude.dim();

        let unit = apply_gain(&spec, &Array2::ones(dim)).unwrap();
        assert_eq!(unit, spec);

        let zero = apply_gain(&spec, &Array2::zeros(dim)).unwrap();
        assert!(zero.magnitude.iter().all(|&v| v == 0.0));
        assert_eq!(zero.phase, spec.phase);

        let half = apply_gain(&spec, &Array2::from_elem(dim, 0.5)).unwrap();
        for (a, b) in half.magnitude.iter().zip(&spec.magnitude) {
            assert_eq!(*a, 0.5 * b);
        }

        let mut bad = Array2::ones(dim);
        bad[[1, 3]] = -0.1;
        assert!(matches!(apply_gain(&spec, &bad), Err(StftError::BadGain { frame: 1, bin: 3, .. })));
        bad[[1, 3]] = f64::NAN;
        assert!(apply_gain(&spec, &bad).is_err());
        assert!(matches!(
            apply_gain(&spec, &Array2::ones((dim.0 + 1, dim.1))),
            Err(StftError::Shape(_))
        ));
    }

    #[test]
    fn phase_shape_mismatch_rejected() {
        let cfg = StftConfig::default();
        let mut spec = Spectrogram::zeros(3, cfg);
        spec.phase = Array2::zeros((2, cfg.num_bins()));
        assert!(matches!(synthesize(&spec), Err(StftError::Shape(_))));
    }
}
