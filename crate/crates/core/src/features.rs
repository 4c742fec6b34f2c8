//! Network input features: the log-compressed noisy envelopes of every band
//! over the context window ending at a frame, standardized per dimension.

use ndarray::Array2;

use crate::octave::EnvelopeMatrix;

/// Standard deviations below this are treated as 1 (constant features).
const MIN_STD: f64 = 1e-8;

/// `log(1 + Y)` of a whole envelope matrix.
pub fn log_envelopes(env: &EnvelopeMatrix) -> Array2<f64> {
    env.values.mapv(f64::ln_1p)
}

/// Writes the features for the window ending at `frame` into `out`, band
/// major: `out[j * context + i]` is band `j`, frame `frame + 1 - context + i`.
pub fn frame_features_into(log_env: &Array2<f64>, frame: usize, context: usize, out: &mut [f64]) {
    let bands = log_env.nrows();
    debug_assert_eq!(out.len(), bands * context);
    debug_assert!(frame + 1 >= context && frame < log_env.ncols());
    let start = frame + 1 - context;
    for j in 0..bands {
        let row = log_env.row(j);
        for i in 0..context {
            out[j * context + i] = row[start + i];
        }
    }
}

pub fn frame_features(log_env: &Array2<f64>, frame: usize, context: usize) -> Vec<f64> {
    let mut out = vec![0.0; log_env.nrows() * context];
    frame_features_into(log_env, frame, context, &mut out);
    out
}

/// Per-dimension mean and standard deviation from training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fits on rows visited in order; summation order is fixed by the caller.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut stats = FeatureStats::new(dim);
        rows.into_iter().for_each(|r| stats.push(r));
        stats.finish()
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}

/// Running sums for [`FeatureNorm::fit`].
#[derive(Debug, Clone)]
pub struct FeatureStats {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
}

impl FeatureStats {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        for ((s, q), &v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(row) {
            *s += v;
            *q += v * v;
        }
        self.count += 1;
    }

    pub fn finish(self) -> FeatureNorm {
        if self.count == 0 {
            return FeatureNorm::identity(self.sum.len());
        }
        let n = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let std = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n - m * m).max(0.0).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        FeatureNorm { mean, std }
    }
}
