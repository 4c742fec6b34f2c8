//! Synthetic pseudo-speech: harmonic complexes shaped by vowel formants,
//! syllabic amplitude modulation, fricative bursts, and pauses. It stands in
//! for a licensed speech corpus when exercising the pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::MixError;
use crate::signal::{TimeSignal, WORKING_RATE_HZ};

/// (F1, F2, F3) in Hz for a handful of vowels.
const VOWELS: [[f64; 3]; 8] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [660.0, 1720.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [640.0, 1190.0, 2390.0],
    [490.0, 1350.0, 1690.0],
    [390.0, 1990.0, 2550.0],
];
const FORMANT_BANDWIDTHS: [f64; 3] = [90.0, 110.0, 170.0];
const MAX_HARMONIC_HZ: f64 = 4500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechParams {
    pub min_utterance_s: f64,
    pub max_utterance_s: f64,
    /// Peak amplitude of each utterance.
    pub peak: f64,
}

impl Default for SpeechParams {
    fn default() -> Self {
        Self {
            min_utterance_s: 2.5,
            max_utterance_s: 5.0,
            peak: 0.7,
        }
    }
}

struct Speaker {
    f0: f64,
    formant_scale: f64,
}

fn formant_gain(freq: f64, formants: &[f64; 3], scale: f64) -> f64 {
    formants
        .iter()
        .zip(FORMANT_BANDWIDTHS)
        .enumerate()
        .map(|(i, (&f, b))| {
            let d = (freq - f * scale) / b;
            // higher formants are weaker
            0.5f64.powi(i as i32) / (1.0 + d * d)
        })
        .sum::<f64>()
        + 0.01
}

fn add_vowel(out: &mut [f64], speaker: &Speaker, rng: &mut ChaCha8Rng) {
    let n = out.len();
    let fs = WORKING_RATE_HZ as f64;
    let formants = VOWELS[rng.gen_range(0..VOWELS.len())];
    let f0_start = speaker.f0 * rng.gen_range(0.9..1.15);
    let f0_end = f0_start * rng.gen_range(0.8..1.05);
    let level = rng.gen_range(0.3..1.0);
    let f0_mid = 0.5 * (f0_start + f0_end);
    let harmonics = (MAX_HARMONIC_HZ / f0_mid) as usize;
    let amps: Vec<f64> = (1..=harmonics)
        .map(|h| formant_gain(h as f64 * f0_mid, &formants, speaker.formant_scale) / (h as f64).sqrt())
        .collect();
    let mut phase = rng.gen_range(0.0..std::f64::consts::TAU);
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / n as f64;
        let f0 = f0_start + (f0_end - f0_start) * t;
        phase = (phase + std::f64::consts::TAU * f0 / fs) % std::f64::consts::TAU;
        // sin(h * phase) by the Chebyshev recurrence
        let c2 = 2.0 * phase.cos();
        let (mut prev, mut cur) = (0.0, phase.sin());
        let mut acc = 0.0;
        for &a in &amps {
            acc += a * cur;
            let next = c2 * cur - prev;
            prev = cur;
            cur = next;
        }
        let env = (std::f64::consts::PI * t).sin().powf(0.6);
        *o += level * env * acc;
    }
}

fn add_fricative(out: &mut [f64], rng: &mut ChaCha8Rng) {
    let n = out.len();
    let level = rng.gen_range(0.1..0.4);
    let (mut x1, mut x2) = (0.0, 0.0);
    for (i, o) in out.iter_mut().enumerate() {
        let w: f64 = rng.sample(StandardNormal);
        // second difference tilts the noise towards high frequencies
        let hp = w - 2.0 * x1 + x2;
        x2 = x1;
        x1 = w;
        let env = (std::f64::consts::PI * i as f64 / n as f64).sin();
        *o += level * env * hp;
    }
}

fn secs(s: f64) -> usize {
    (s * WORKING_RATE_HZ as f64) as usize
}

/// One utterance at the working rate.
pub fn pseudo_speech(params: &SpeechParams, seed: u64) -> Result<TimeSignal, MixError> {
    if !(params.min_utterance_s > 0.5 && params.max_utterance_s >= params.min_utterance_s) {
        return Err(MixError::Config(format!(
            "utterance length range {}..{} s",
            params.min_utterance_s, params.max_utterance_s
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speaker = Speaker {
        f0: rng.gen_range(90.0..230.0),
        formant_scale: rng.gen_range(0.85..1.2),
    };
    let target = secs(rng.gen_range(params.min_utterance_s..=params.max_utterance_s));
    let mut out = vec![0.0; target];
    let mut pos = secs(rng.gen_range(0.05..0.2));
    let tail = secs(0.25);
    'words: loop {
        for _ in 0..rng.gen_range(1..=3) {
            let fricative = rng.gen_bool(0.3);
            let f_len = if fricative { secs(rng.gen_range(0.04..0.12)) } else { 0 };
            let v_len = secs(rng.gen_range(0.1..0.28));
            if pos + f_len + v_len + tail > target {
                break 'words;
            }
            if fricative {
                add_fricative(&mut out[pos..pos + f_len], &mut rng);
                pos += f_len * 3 / 4;
            }
            add_vowel(&mut out[pos..pos + v_len], &speaker, &mut rng);
            pos += v_len + secs(rng.gen_range(0.0..0.04));
        }
        pos += secs(rng.gen_range(0.12..0.45));
        if rng.gen_bool(0.25) {
            // phrase boundary
            pos += secs(rng.gen_range(0.3..0.7));
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak <= 0.0 {
        return Err(MixError::Silent("pseudo-speech"));
    }
    let scale = params.peak / peak;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(TimeSignal::working(out))
}

/// Utterances with consecutive seeds until their total duration reaches `total_s`.
pub fn pseudo_speech_corpus(total_s: f64, params: &SpeechParams, seed: u64) -> Result<Vec<TimeSignal>, MixError> {
    let mut out = Vec::new();
    let mut have = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while have < total_s {
        let utt = pseudo_speech(params, rng.gen())?;
        have += utt.duration_s();
        out.push(utt);
    }
    Ok(out)
}
