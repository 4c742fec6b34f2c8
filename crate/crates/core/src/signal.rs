//! Mono time-domain signals: WAV input/output, resampling to the 10 kHz
//! working rate, and deterministic test tones.

use std::f64::consts::PI;
use std::path::Path;

use thiserror::Error;

/// Sample rate every stage after `to_working_rate` operates at.
pub const WORKING_RATE_HZ: u32 = 10_000;

/// Lowest input rate accepted by the resampler.
pub const MIN_INPUT_RATE_HZ: u32 = 8_000;

const RESAMPLER_TAPS: usize = 64;
const RESAMPLER_BETA: f64 = 8.6;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("audio file not found: {0}")]
    NotFound(String),
    #[error("malformed RIFF/WAVE data in {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("unsupported WAV encoding in {path}: {reason}")]
    Unsupported { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sample rate {0} Hz is below the supported minimum of {MIN_INPUT_RATE_HZ} Hz")]
    RateTooLow(u32),
    #[error("tone frequency {0} Hz is outside [0, {nyquist}) Hz", nyquist = WORKING_RATE_HZ / 2)]
    BadFrequency(f64),
    #[error("invalid duration {0} s")]
    BadDuration(f64),
    #[error("signal is empty")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// A mono sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl TimeSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    /// Shorthand for a signal already at the working rate.
    pub fn working(samples: Vec<f64>) -> Self {
        Self::new(samples, WORKING_RATE_HZ)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate_hz,
        )
    }

    /// Copy of `len` samples starting at `start`.
    pub fn segment(&self, start: usize, len: usize) -> Self {
        Self::new(
            self.samples[start..start + len].to_vec(),
            self.sample_rate_hz,
        )
    }

    pub fn ensure_non_empty(&self) -> Result<(), SignalError> {
        if self.samples.is_empty() {
            Err(SignalError::Empty)
        } else {
            Ok(())
        }
    }
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

/// Reads the first channel of a PCM or IEEE-float WAV file as amplitudes in [-1, 1].
pub fn read_wav(path: impl AsRef<Path>) -> Result<TimeSignal, SignalError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    if !path.exists() {
        return Err(SignalError::NotFound(shown));
    }
    let mut reader = hound::WavReader::open(path).map_err(|e| classify_hound(e, &shown))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(SignalError::Malformed {
            path: shown,
            reason: "zero channels".into(),
        });
    }
    if channels > 1 {
        log::warn!("{shown}: {channels} channels, using channel 0 only");
    }

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>(),
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .step_by(channels)
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()
        }
        (format, bits) => {
            return Err(SignalError::Unsupported {
                path: shown,
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    }
    .map_err(|e| classify_hound(e, &shown))?;

    Ok(TimeSignal::new(samples, spec.sample_rate))
}

fn classify_hound(err: hound::Error, path: &str) -> SignalError {
    match err {
        hound::Error::IoError(source) => {
            if source.kind() == std::io::ErrorKind::UnexpectedEof {
                SignalError::Malformed {
                    path: path.to_string(),
                    reason: "truncated file".into(),
                }
            } else {
                SignalError::Io {
                    path: path.to_string(),
                    source,
                }
            }
        }
        hound::Error::FormatError(reason) => SignalError::Malformed {
            path: path.to_string(),
            reason: reason.to_string(),
        },
        hound::Error::Unsupported => SignalError::Unsupported {
            path: path.to_string(),
            reason: "encoding not supported".into(),
        },
        other => SignalError::Malformed {
            path: path.to_string(),
            reason: other.to_string(),
        },
    }
}

/// Maps an amplitude to a 16-bit code: clamp to [-1, 1], scale by 2^15,
/// round half away from zero, saturate at the positive rail.
pub fn quantize_i16(x: f64) -> i16 {
    let scaled = (x.clamp(-1.0, 1.0) * 32768.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

/// Writes a 16-bit PCM mono WAV file. Out-of-range amplitudes are clamped.
pub fn write_wav(signal: &TimeSignal, path: impl AsRef<Path>) -> Result<(), SignalError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    if let Some(i) = signal.samples.iter().position(|s| !s.is_finite()) {
        return Err(SignalError::NonFinite(i));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let write_err = |e: hound::Error| SignalError::Write {
        path: shown.clone(),
        reason: e.to_string(),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(write_err)?;
    for &s in &signal.samples {
        writer.write_sample(quantize_i16(s)).map_err(write_err)?;
    }
    writer.finalize().map_err(write_err)
}

/// Resamples to 10 kHz with a Kaiser-windowed sinc polyphase filter.
///
/// Signals already at the working rate are copied unchanged.
pub fn to_working_rate(signal: &TimeSignal) -> Result<TimeSignal, SignalError> {
    resample(signal, WORKING_RATE_HZ)
}

/// Rational-ratio resampler behind [`to_working_rate`].
pub fn resample(signal: &TimeSignal, target_hz: u32) -> Result<TimeSignal, SignalError> {
    let source_hz = signal.sample_rate_hz;
    if source_hz < MIN_INPUT_RATE_HZ {
        return Err(SignalError::RateTooLow(source_hz));
    }
    if source_hz == target_hz {
        return Ok(signal.clone());
    }
    let g = gcd(source_hz as u64, target_hz as u64);
    let up = (target_hz as u64 / g) as usize;
    let down = (source_hz as u64 / g) as usize;
    let bank = PolyphaseBank::new(up, down);

    let input = &signal.samples;
    let out_len = ((input.len() as f64) * up as f64 / down as f64).round() as usize;
    let half = RESAMPLER_TAPS / 2;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let pos = n * down;
        let base = pos / up;
        let phase = pos % up;
        let taps = bank.phase(phase);
        // taps[t] weights input sample base + t + 1 - half
        let mut acc = 0.0;
        for (t, &h) in taps.iter().enumerate() {
            let idx = base as isize + t as isize + 1 - half as isize;
            if idx >= 0 && (idx as usize) < input.len() {
                acc += h * input[idx as usize];
            }
        }
        out.push(acc);
    }
    Ok(TimeSignal::new(out, target_hz))
}

struct PolyphaseBank {
    taps: Vec<f64>,
}

impl PolyphaseBank {
    fn new(up: usize, down: usize) -> Self {
        // cutoff relative to the input Nyquist frequency
        let cutoff = (up as f64 / down as f64).min(1.0);
        let half = RESAMPLER_TAPS / 2;
        let i0_beta = bessel_i0(RESAMPLER_BETA);
        let mut taps = Vec::with_capacity(up * RESAMPLER_TAPS);
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            let start = taps.len();
            for t in 0..RESAMPLER_TAPS {
                // distance from output instant to the input sample this tap weights
                let offset = (t as f64 + 1.0 - half as f64) - frac;
                let x = offset / half as f64;
                let window = if x.abs() <= 1.0 {
                    bessel_i0(RESAMPLER_BETA * (1.0 - x * x).sqrt()) / i0_beta
                } else {
                    0.0
                };
                taps.push(cutoff * sinc(cutoff * offset) * window);
            }
            let sum: f64 = taps[start..].iter().sum();
            for h in &mut taps[start..] {
                *h /= sum;
            }
        }
        Self { taps }
    }

    fn phase(&self, phase: usize) -> &[f64] {
        &self.taps[phase * RESAMPLER_TAPS..(phase + 1) * RESAMPLER_TAPS]
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Deterministic tone at the working rate, cosine phase so the first sample
/// sits at the peak: `amplitude * sin(2 pi f n / fs + pi / 2)`.
pub fn synth_tone(freq_hz: f64, duration_s: f64, amplitude: f64) -> Result<TimeSignal, SignalError> {
    let nyquist = WORKING_RATE_HZ as f64 / 2.0;
    if !(0.0..nyquist).contains(&freq_hz) {
        return Err(SignalError::BadFrequency(freq_hz));
    }
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(SignalError::BadDuration(duration_s));
    }
    let len = (duration_s * WORKING_RATE_HZ as f64).round() as usize;
    let w = 2.0 * PI * freq_hz / WORKING_RATE_HZ as f64;
    let samples = (0..len)
        .map(|n| amplitude * (w * n as f64 + PI / 2.0).sin())
        .collect();
    Ok(TimeSignal::working(samples))
}
