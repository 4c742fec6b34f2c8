//! Active speech level, method-B style: a two-stage exponentially smoothed
//! rectified envelope, 16 activity thresholds with a 200 ms hangover, and
//! the level at which the active power sits 15.9 dB above the threshold.

use super::MixError;
use crate::signal::TimeSignal;

pub const TIME_CONSTANT_S: f64 = 0.03;
pub const HANGOVER_S: f64 = 0.2;
pub const MARGIN_DB: f64 = 15.9;
pub const NUM_THRESHOLDS: usize = 16;

/// Power level of `samples` in dB (`10 log10` of the mean square).
pub fn overall_level_db(samples: &[f64]) -> f64 {
    let ms = samples.iter().map(|v| v * v).sum::<f64>() / samples.len().max(1) as f64;
    10.0 * ms.log10()
}

/// Active speech level in dB relative to full scale amplitude 1.
///
/// The threshold ladder is `peak * 2^(i - 15)` with `peak` the largest
/// envelope value, so scaling the input by `a` shifts the result by exactly
/// `20 log10 a`.
pub fn active_speech_level(speech: &TimeSignal) -> Result<f64, MixError> {
    let x = &speech.samples;
    let fs = speech.sample_rate_hz as f64;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MixError::NonFinite);
    }
    let g = (-1.0 / (fs * TIME_CONSTANT_S)).exp();
    let mut env = Vec::with_capacity(x.len());
    let (mut q, mut p) = (0.0, 0.0);
    for &v in x {
        q = g * q + (1.0 - g) * v.abs();
        p = g * p + (1.0 - g) * q;
        env.push(p);
    }
    let peak = env.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(MixError::Silent("speech"));
    }
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let hangover = (HANGOVER_S * fs + 0.5) as usize;
    let thresholds: Vec<f64> = (0..NUM_THRESHOLDS)
        .map(|i| peak * 2f64.powi(i as i32 - (NUM_THRESHOLDS as i32 - 1)))
        .collect();

    let mut active = [0usize; NUM_THRESHOLDS];
    let mut hang = [hangover; NUM_THRESHOLDS];
    for &e in &env {
        for i in 0..NUM_THRESHOLDS {
            if e >= thresholds[i] {
                active[i] += 1;
                hang[i] = 0;
            } else if hang[i] < hangover {
                active[i] += 1;
                hang[i] += 1;
            }
        }
    }

    // active level and its distance above the threshold, per rung
    let rung = |i: usize| -> (f64, f64) {
        let level = 10.0 * (sum_sq / active[i] as f64).log10();
        (level, level - 20.0 * thresholds[i].log10())
    };
    let (first_level, first_delta) = rung(0);
    if first_delta <= MARGIN_DB {
        return Ok(first_level);
    }
    let mut prev = (first_level, first_delta);
    for i in 1..NUM_THRESHOLDS {
        // the top rung always has the peak sample active, so counts stay positive
        let cur = rung(i);
        if cur.1 <= MARGIN_DB {
            let t = (prev.1 - MARGIN_DB) / (prev.1 - cur.1);
            return Ok(prev.0 + t * (cur.0 - prev.0));
        }
        prev = cur;
    }
    Ok(prev.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth_tone;

    #[test]
    fn full_scale_sine_matches_rms() {
        let s = synth_tone(440.0, 3.0, 1.0).unwrap();
        let asl = active_speech_level(&s).unwrap();
        assert!((asl - (-3.0103)).abs() < 0.5, "{asl}");
    }

    #[test]
    fn burst_then_silence() {
        let burst = synth_tone(300.0, 4.0, 0.5).unwrap();
        let mut samples = burst.samples.clone();
        samples.extend(std::iter::repeat(0.0).take(burst.len()));
        let s = TimeSignal::working(samples);
        let asl = active_speech_level(&s).unwrap();
        let burst_db = overall_level_db(&burst.samples);
        assert!((asl - burst_db).abs() < 1.0, "{asl} vs {burst_db}");
        let overall = overall_level_db(&s.samples);
        assert!((burst_db - overall - 3.0103).abs() < 0.01);
    }

    #[test]
    fn scale_equivariance() {
        let s = synth_tone(700.0, 1.0, 0.3).unwrap();
        let base = active_speech_level(&s).unwrap();
        for a in [0.01, 0.5, 3.0, 1000.0] {
            let scaled = active_speech_level(&s.scaled(a)).unwrap();
            assert!((scaled - base - 20.0 * f64::log10(a)).abs() < 1e-9);
        }
    }

    #[test]
    fn silence_is_an_error() {
        let s = TimeSignal::working(vec![0.0; 1000]);
        assert!(matches!(active_speech_level(&s), Err(MixError::Silent(_))));
    }
}
