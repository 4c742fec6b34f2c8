//! Central finite-difference check of back-propagation through the whole
//! network and objective.

use ndarray::Array2;

use super::loss::{batch_loss, loss_gradients, LossSpec};
use super::mlp::MlpModel;
use super::NeuralError;

/// Denominator floor for the relative error. Biases feeding a batch norm have
/// an exactly zero gradient (the normalization removes any per-unit offset),
/// so a pure ratio would compare rounding noise against rounding noise.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    pub parameters_checked: usize,
    /// (parameter group, index) of the worst entry.
    pub worst: (usize, usize),
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares `backward` against `(L(p+h) - L(p-h)) / 2h` for every trainable
/// parameter, with the loss evaluated in training mode.
pub fn check_gradients(
    model: &MlpModel,
    inputs: &Array2<f64>,
    clean: &Array2<f64>,
    noisy: &Array2<f64>,
    spec: LossSpec,
    h: f64,
) -> Result<GradCheckReport, NeuralError> {
    let (_, grads, _) = loss_gradients(model, inputs, clean, noisy, spec, None)?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let loss_at = |m: &MlpModel| -> Result<f64, NeuralError> {
        let cache = m.forward_train(inputs)?;
        Ok(batch_loss(spec, cache.output(), clean, noisy, None)?.total)
    };
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_abs_error: 0.0,
        parameters_checked: 0,
        worst: (0, 0),
    };
    for (g, group) in analytic.iter().enumerate() {
        for (i, &a) in group.iter().enumerate() {
            let original = probe.parameters()[g][i];
            probe.parameters_mut()[g][i] = original + h;
            let plus = loss_at(&probe)?;
            probe.parameters_mut()[g][i] = original - h;
            let minus = loss_at(&probe)?;
            probe.parameters_mut()[g][i] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = relative_error(a, numeric);
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (g, i);
            }
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            report.parameters_checked += 1;
        }
    }
    Ok(report)
}
