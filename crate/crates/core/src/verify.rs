//! Self-checks of the analytic gradients against finite differences and of
//! the gradient-norm identity, as run by the `verify` command.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{elc, elc_grad, CostError};
use crate::neural::{check_gradients, LossSpec, MlpModel, ModelShape, Objective};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    pub pairs: usize,
    /// Largest `max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|)`.
    pub max_relative_error: f64,
    /// Largest `| ||grad|| - sqrt(1 - L^2) / ||centred estimate|| |`.
    pub max_identity_error: f64,
}

fn centred_norm(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt()
}

/// Random envelope-like pairs of length `n`, entries uniform in `[0, 1)`.
pub fn elc_gradient_sweep(pairs: usize, n: usize, h: f64, seed: u64) -> Result<SweepStats, CostError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SweepStats {
        pairs,
        max_relative_error: 0.0,
        max_identity_error: 0.0,
    };
    let mut probe = vec![0.0; n];
    for _ in 0..pairs {
        let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let xh: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let g = elc_grad(&x, &xh)?;
        probe.copy_from_slice(&xh);
        let mut worst_diff = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            probe[i] = xh[i] + h;
            let plus = elc(&x, &probe)?;
            probe[i] = xh[i] - h;
            let minus = elc(&x, &probe)?;
            probe[i] = xh[i];
            let numeric = (plus - minus) / (2.0 * h);
            worst_diff = worst_diff.max((g[i] - numeric).abs());
            scale = scale.max(g[i].abs()).max(numeric.abs());
        }
        stats.max_relative_error = stats.max_relative_error.max(worst_diff / scale);
        let l = elc(&x, &xh)?;
        let predicted = (1.0 - l * l).max(0.0).sqrt() / centred_norm(&xh);
        let actual = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        stats.max_identity_error = stats.max_identity_error.max((actual - predicted).abs());
    }
    Ok(stats)
}

/// Measured gradient norms of estimates built to have correlation exactly `L` with a
/// fixed clean vector and unit centred norm, for `points` values of `L`
/// spanning `[-1, 1]`.
pub fn gradient_norm_curve(points: usize, n: usize, seed: u64) -> Result<Vec<(f64, f64)>, CostError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = |v: Vec<f64>| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.into_iter().map(|x| x - mean).collect::<Vec<f64>>()
    };
    let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let u = {
        let c = centre(x.clone());
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
    };
    let v = {
        let r = centre((0..n).map(|_| rng.gen()).collect());
        let along: f64 = r.iter().zip(&u).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = r.iter().zip(&u).map(|(a, b)| a - along * b).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
    };
    (0..points)
        .map(|i| {
            let l = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            let s = (1.0 - l * l).max(0.0).sqrt();
            // an offset keeps the estimate positive like a real envelope
            let xh: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 + l * a + s * b).collect();
            let g = elc_grad(&x, &xh)?;
            Ok((l, g.iter().map(|v| v * v).sum::<f64>().sqrt()))
        })
        .collect()
}

fn network_check(objective: Objective, rows: usize, seed: u64) -> Result<f64, crate::neural::NeuralError> {
    let model = MlpModel::init(&ModelShape::three_hidden(6, 4, 3), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let inputs = Array2::from_shape_simple_fn((rows, 6), || rng.gen_range(-2.0..2.0));
    let clean = Array2::from_shape_simple_fn((rows, 3), || rng.gen_range(0.1..3.0));
    let noisy = Array2::from_shape_simple_fn((rows, 3), || rng.gen_range(0.5..4.0));
    Ok(check_gradients(&model, &inputs, &clean, &noisy, LossSpec::new(objective, 3), 1e-5)?.max_relative_error)
}

/// Runs every check. `pairs` sets the size of the random sweep.
pub fn run_all(pairs: usize, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    match elc_gradient_sweep(pairs, 30, 1e-6, seed) {
        Ok(s) => {
            out.push(Check {
                name: "ELC gradient vs central differences".into(),
                passed: s.max_relative_error <= 1e-6,
                detail: format!("{} pairs, max relative error {:.3e} (limit 1e-6)", s.pairs, s.max_relative_error),
            });
            out.push(Check {
                name: "gradient norm identity".into(),
                passed: s.max_identity_error <= 1e-9,
                detail: format!("max deviation {:.3e} (limit 1e-9)", s.max_identity_error),
            });
        }
        Err(e) => out.push(Check {
            name: "ELC gradient sweep".into(),
            passed: false,
            detail: e.to_string(),
        }),
    }
    match gradient_norm_curve(201, 30, seed) {
        Ok(curve) => {
            let k = curve.len();
            let symmetric = (0..k).all(|i| (curve[i].1 - curve[k - 1 - i].1).abs() <= 1e-9);
            let peak = curve
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |b, (i, p)| if p.1 > b.1 { (i, p.1) } else { b })
                .0;
            let ends = curve[0].1.abs() <= 1e-9 && curve[k - 1].1.abs() <= 1e-9;
            out.push(Check {
                name: "gradient norm curve shape".into(),
                passed: symmetric && peak == k / 2 && ends,
                detail: format!(
                    "{k} points, symmetric {symmetric}, maximum at L={:.2}, zero at |L|=1 {ends}",
                    curve[peak].0
                ),
            });
        }
        Err(e) => out.push(Check {
            name: "gradient norm curve shape".into(),
            passed: false,
            detail: e.to_string(),
        }),
    }
    for objective in [Objective::Elc, Objective::Emse] {
        let name = format!("network gradient ({objective})");
        let result = [2, 8].iter().map(|&rows| network_check(objective, rows, seed)).collect::<Result<Vec<_>, _>>();
        out.push(match result {
            Ok(errs) => {
                let worst = errs.iter().cloned().fold(0.0, f64::max);
                Check {
                    name,
                    passed: worst <= 1e-5,
                    detail: format!("6-4-4-4-3 network, max relative error {worst:.3e} (limit 1e-5)"),
                }
            }
            Err(e) => Check {
                name,
                passed: false,
                detail: e.to_string(),
            },
        });
    }
    out
}
