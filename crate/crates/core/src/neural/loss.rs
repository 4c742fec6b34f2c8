//! Output-layer objectives. The network emits gains `g`; the estimate fed to
//! the cost is `g * y` with `y` the noisy envelope (or magnitude) row, so
//! the gradient with respect to gain `m` is `dcost/dx^_m * y_m`.

use ndarray::Array2;

use super::mlp::{ForwardCache, Gradients, MlpModel};
use super::NeuralError;
use crate::cost::{self, CostError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Minimizes `-ELC` per segment.
    Elc,
    /// Mean squared error per envelope segment.
    Emse,
    /// Mean squared error over STFT magnitudes (classical baseline).
    SpectralMse,
}

impl Objective {
    pub fn tag(self) -> u8 {
        match self {
            Objective::Elc => 0,
            Objective::Emse => 1,
            Objective::SpectralMse => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Objective::Elc),
            1 => Some(Objective::Emse),
            2 => Some(Objective::SpectralMse),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Elc => "elc",
            Objective::Emse => "emse",
            Objective::SpectralMse => "spectral-mse",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "elc" => Ok(Objective::Elc),
            "emse" => Ok(Objective::Emse),
            "spectral-mse" | "mse" => Ok(Objective::SpectralMse),
            other => Err(format!("unknown objective {other:?}")),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An objective applied independently to consecutive `segment_len`-entry
/// slices of each output row; the row loss is the sum over segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSpec {
    pub objective: Objective,
    pub segment_len: usize,
}

impl LossSpec {
    pub fn new(objective: Objective, segment_len: usize) -> Self {
        Self {
            objective,
            segment_len,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchLoss {
    /// Weighted sum of segment losses over non-degenerate segments.
    pub total: f64,
    /// Segments that contributed.
    pub counted: usize,
    /// Degenerate segments (zero variance) that were skipped.
    pub skipped: usize,
    /// Gradient of `total` with respect to the network output.
    pub d_output: Array2<f64>,
}

impl BatchLoss {
    pub fn mean(&self) -> f64 {
        if self.counted == 0 {
            0.0
        } else {
            self.total / self.counted as f64
        }
    }
}

/// Loss of one segment and its gradient with respect to the gains.
fn segment_loss(
    objective: Objective,
    gains: &[f64],
    clean: &[f64],
    noisy: &[f64],
) -> Result<(f64, Vec<f64>), CostError> {
    let estimate: Vec<f64> = gains.iter().zip(noisy).map(|(g, y)| g * y).collect();
    let (loss, d_estimate) = match objective {
        Objective::Elc => {
            let (l, grad) = cost::elc_with_grad(clean, &estimate)?;
            (-l, grad.into_iter().map(|v| -v).collect::<Vec<_>>())
        }
        Objective::Emse | Objective::SpectralMse => (
            cost::emse(clean, &estimate)?,
            cost::emse_grad(clean, &estimate)?,
        ),
    };
    Ok((
        loss,
        d_estimate.iter().zip(noisy).map(|(d, y)| d * y).collect(),
    ))
}

/// Evaluates the objective over a batch of network outputs. Degenerate ELC
/// segments contribute zero loss and zero gradient and are counted.
pub fn batch_loss(
    spec: LossSpec,
    gains: &Array2<f64>,
    clean: &Array2<f64>,
    noisy: &Array2<f64>,
    weights: Option<&[f64]>,
) -> Result<BatchLoss, NeuralError> {
    let dim = gains.dim();
    if clean.dim() != dim || noisy.dim() != dim {
        return Err(NeuralError::Shape(format!(
            "gains {dim:?}, clean {:?}, noisy {:?}",
            clean.dim(),
            noisy.dim()
        )));
    }
    if spec.segment_len == 0 || dim.1 % spec.segment_len != 0 {
        return Err(NeuralError::Shape(format!(
            "output width {} is not a multiple of segment length {}",
            dim.1, spec.segment_len
        )));
    }
    if let Some(w) = weights {
        if w.len() != dim.0 {
            return Err(NeuralError::Shape(format!("{} weights for {} rows", w.len(), dim.0)));
        }
    }
    let mut out = BatchLoss {
        total: 0.0,
        counted: 0,
        skipped: 0,
        d_output: Array2::zeros(dim),
    };
    for r in 0..dim.0 {
        let weight = weights.map_or(1.0, |w| w[r]);
        let g = gains.row(r);
        let x = clean.row(r);
        let y = noisy.row(r);
        let (g, x, y) = (
            g.as_slice().expect("standard layout"),
            x.as_slice().expect("standard layout"),
            y.as_slice().expect("standard layout"),
        );
        for start in (0..dim.1).step_by(spec.segment_len) {
            let range = start..start + spec.segment_len;
            match segment_loss(spec.objective, &g[range.clone()], &x[range.clone()], &y[range.clone()]) {
                Ok((loss, grad)) => {
                    out.total += weight * loss;
                    out.counted += 1;
                    for (d, v) in out.d_output.row_mut(r).as_slice_mut().unwrap()[range]
                        .iter_mut()
                        .zip(grad)
                    {
                        *d = weight * v;
                    }
                }
                Err(CostError::ZeroVariance { .. }) => out.skipped += 1,
                Err(e) => return Err(NeuralError::Cost(e)),
            }
        }
    }
    Ok(out)
}

/// Training-mode forward pass, objective, and back-propagation in one step.
pub fn loss_gradients(
    model: &MlpModel,
    inputs: &Array2<f64>,
    clean: &Array2<f64>,
    noisy: &Array2<f64>,
    spec: LossSpec,
    weights: Option<&[f64]>,
) -> Result<(BatchLoss, Gradients, ForwardCache), NeuralError> {
    let cache = model.forward_train(inputs)?;
    let loss = batch_loss(spec, cache.output(), clean, noisy, weights)?;
    let grads = model.backward(&cache, &loss.d_output);
    Ok((loss, grads, cache))
}
