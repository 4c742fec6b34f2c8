//! Noise synthesis, splitting, and mixing at an exact SNR.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::p56::{active_speech_level, overall_level_db};
use super::MixError;
use crate::signal::TimeSignal;
use crate::stft::hann;

pub const SSN_FIR_TAPS: usize = 512;
pub const MIN_SSN_REFERENCE_S: f64 = 30.0;
pub const DEFAULT_BABBLE_SPEAKERS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixture: TimeSignal,
    pub scaled_noise: TimeSignal,
    /// First noise sample used.
    pub noise_offset: usize,
    pub noise_gain: f64,
}

/// Active level of `speech` minus the overall level of `noise`, in dB.
pub fn measured_snr_db(speech: &TimeSignal, noise: &TimeSignal) -> Result<f64, MixError> {
    Ok(active_speech_level(speech)? - overall_level_db(&noise.samples))
}

/// Cuts a seeded random noise segment as long as `speech`, scales it so that
/// the speech active level sits `snr_db` above the noise overall level, and
/// adds it.
pub fn mix_at_snr(speech: &TimeSignal, noise: &TimeSignal, snr_db: f64, seed: u64) -> Result<Mixture, MixError> {
    if speech.sample_rate_hz != noise.sample_rate_hz {
        return Err(MixError::RateMismatch(speech.sample_rate_hz, noise.sample_rate_hz));
    }
    if !snr_db.is_finite() {
        return Err(MixError::Config(format!("snr {snr_db}")));
    }
    if noise.len() < speech.len() {
        return Err(MixError::TooShort {
            what: "noise",
            needed: speech.len(),
            available: noise.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_offset = rng.gen_range(0..=noise.len() - speech.len());
    let segment = &noise.samples[noise_offset..noise_offset + speech.len()];
    let noise_db = overall_level_db(segment);
    if !noise_db.is_finite() {
        return Err(MixError::Silent("noise"));
    }
    let speech_db = active_speech_level(speech)?;
    let noise_gain = 10f64.powf((speech_db - snr_db - noise_db) / 20.0);
    let scaled: Vec<f64> = segment.iter().map(|v| v * noise_gain).collect();
    let mixture = speech.samples.iter().zip(&scaled).map(|(s, n)| s + n).collect();
    Ok(Mixture {
        mixture: TimeSignal::new(mixture, speech.sample_rate_hz),
        scaled_noise: TimeSignal::new(scaled, speech.sample_rate_hz),
        noise_offset,
        noise_gain,
    })
}

/// Welch power spectrum (Hann, 50% overlap) averaged over every full
/// segment of every signal. Returns `seg_len / 2 + 1` bins.
pub fn welch_psd(signals: &[&[f64]], seg_len: usize) -> Vec<f64> {
    let window = hann(seg_len);
    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let mut acc = vec![0.0; seg_len / 2 + 1];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); seg_len];
    for s in signals {
        let mut start = 0;
        while start + seg_len <= s.len() {
            for (b, (x, w)) in buf.iter_mut().zip(s[start..].iter().zip(&window)) {
                *b = Complex::new(x * w, 0.0);
            }
            fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            count += 1;
            start += seg_len / 2;
        }
    }
    let norm = count.max(1) as f64 * window.iter().map(|w| w * w).sum::<f64>();
    acc.iter().map(|a| a / norm).collect()
}

/// Linear-phase FIR whose magnitude response samples `sqrt(psd)`, designed
/// by frequency sampling and a Hann taper.
fn fir_from_psd(psd: &[f64]) -> Vec<f64> {
    let n = SSN_FIR_TAPS;
    debug_assert_eq!(psd.len(), n / 2 + 1);
    let mut spec: Vec<Complex<f64>> = (0..n)
        .map(|k| Complex::new(psd[k.min(n - k)].sqrt(), 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let window = hann(n);
    (0..n)
        .map(|i| spec[(i + n / 2) % n].re / n as f64 * window[i])
        .collect()
}

/// Overlap-add FFT convolution, returning the first `input.len()` outputs.
fn fft_filter(input: &[f64], taps: &[f64]) -> Vec<f64> {
    let fft_len = 8192;
    let block = fft_len - taps.len() + 1;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut h: Vec<Complex<f64>> = (0..fft_len)
        .map(|i| Complex::new(taps.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fwd.process(&mut h);
    let mut out = vec![0.0; input.len() + taps.len()];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for (b, chunk) in input.chunks(block).enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (c, &x) in buf.iter_mut().zip(chunk) {
            c.re = x;
        }
        fwd.process(&mut buf);
        for (c, hh) in buf.iter_mut().zip(&h) {
            *c *= hh;
        }
        inv.process(&mut buf);
        let start = b * block;
        for (i, c) in buf.iter().take(chunk.len() + taps.len() - 1).enumerate() {
            out[start + i] += c.re / fft_len as f64;
        }
    }
    out.truncate(input.len());
    out
}

fn unit_rms(mut samples: Vec<f64>, what: &'static str) -> Result<Vec<f64>, MixError> {
    let r = crate::signal::rms(&samples);
    if r <= 0.0 || !r.is_finite() {
        return Err(MixError::Silent(what));
    }
    samples.iter_mut().for_each(|v| *v /= r);
    Ok(samples)
}

fn common_rate(reference: &[TimeSignal]) -> Result<u32, MixError> {
    let rate = reference.first().map_or(crate::signal::WORKING_RATE_HZ, |s| s.sample_rate_hz);
    match reference.iter().find(|s| s.sample_rate_hz != rate) {
        Some(s) => Err(MixError::RateMismatch(rate, s.sample_rate_hz)),
        None => Ok(rate),
    }
}

/// Gaussian noise shaped to the long-term spectrum of `reference`, at unit RMS.
pub fn synth_ssn(reference: &[TimeSignal], duration_s: f64, seed: u64) -> Result<TimeSignal, MixError> {
    let rate = common_rate(reference)?;
    let available: f64 = reference.iter().map(|s| s.duration_s()).sum();
    if available < MIN_SSN_REFERENCE_S {
        return Err(MixError::InsufficientReference {
            needed_s: MIN_SSN_REFERENCE_S,
            available_s: available,
        });
    }
    let n = duration_samples(duration_s, rate)?;
    let slices: Vec<&[f64]> = reference.iter().map(|s| s.samples.as_slice()).collect();
    let psd = welch_psd(&slices, SSN_FIR_TAPS);
    let taps = fir_from_psd(&psd);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..n + taps.len() - 1).map(|_| rng.sample(StandardNormal)).collect();
    let shaped = fft_filter(&white, &taps);
    // drop the start-up transient
    let out = shaped[taps.len() - 1..].to_vec();
    Ok(TimeSignal::new(unit_rms(out, "shaped noise")?, rate))
}

/// Sum of `num_speakers` streams, each a seeded concatenation of its own
/// unit-RMS utterances, normalized to unit RMS.
pub fn synth_babble(
    reference: &[TimeSignal],
    num_speakers: usize,
    duration_s: f64,
    seed: u64,
) -> Result<TimeSignal, MixError> {
    if num_speakers == 0 || reference.len() < num_speakers {
        return Err(MixError::InsufficientStreams {
            needed: num_speakers.max(1),
            available: reference.len(),
        });
    }
    let rate = common_rate(reference)?;
    let n = duration_samples(duration_s, rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..reference.len()).collect();
    order.shuffle(&mut rng);
    let mut total = vec![0.0; n];
    for speaker in 0..num_speakers {
        let own: Vec<usize> = order.iter().skip(speaker).step_by(num_speakers).copied().collect();
        let mut stream = Vec::with_capacity(n + 1);
        let mut next = rng.gen_range(0..own.len());
        while stream.len() < n {
            let utt = &reference[own[next]];
            stream.extend(unit_rms(utt.samples.clone(), "babble utterance")?);
            next = (next + 1) % own.len();
        }
        stream.truncate(n);
        let stream = unit_rms(stream, "babble stream")?;
        for (t, s) in total.iter_mut().zip(stream) {
            *t += s;
        }
    }
    Ok(TimeSignal::new(unit_rms(total, "babble")?, rate))
}

/// Three contiguous, disjoint segments taken from the front of `noise`.
pub fn split_noise(
    noise: &TimeSignal,
    train_s: f64,
    validation_s: f64,
    test_s: f64,
) -> Result<[TimeSignal; 3], MixError> {
    let rate = noise.sample_rate_hz;
    let lens = [
        duration_samples(train_s, rate)?,
        duration_samples(validation_s, rate)?,
        duration_samples(test_s, rate)?,
    ];
    let needed: usize = lens.iter().sum();
    if needed > noise.len() {
        return Err(MixError::TooShort {
            what: "noise",
            needed,
            available: noise.len(),
        });
    }
    let mut start = 0;
    Ok(lens.map(|len| {
        let seg = noise.segment(start, len);
        start += len;
        seg
    }))
}

pub(crate) fn duration_samples(duration_s: f64, rate: u32) -> Result<usize, MixError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(MixError::Config(format!("duration {duration_s} s")));
    }
    Ok((duration_s * rate as f64).round() as usize)
}
