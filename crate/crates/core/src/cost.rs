//! Envelope linear correlation (the clip-free short-time intelligibility
//! approximation), its analytic gradient, and the envelope MSE objective.
//!
//! All quantities are maximize-form; trainers negate ELC themselves.

use thiserror::Error;

/// Threshold on centred norms and on the centred cross inner product.
pub const DEGENERACY_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum CostError {
    #[error("length mismatch: clean has {clean} entries, estimate has {estimate}")]
    LengthMismatch { clean: usize, estimate: usize },
    #[error("correlation needs at least two entries, got {0}")]
    TooShort(usize),
    #[error("zero-variance {which} vector (centred norm {norm:e})")]
    ZeroVariance { which: Operand, norm: f64 },
    #[error("centred cross inner product {0:e} is numerically zero")]
    ZeroCrossCorrelation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Clean,
    Estimate,
}

impl std::fmt::Display for Operand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Operand::Clean => "clean",
            Operand::Estimate => "estimate",
        })
    }
}

/// Centred copies of both vectors and their norms.
struct Centred {
    clean: Vec<f64>,
    estimate: Vec<f64>,
    clean_norm: f64,
    estimate_norm: f64,
}

impl Centred {
    fn new(clean: &[f64], estimate: &[f64]) -> Result<Self, CostError> {
        if clean.len() != estimate.len() {
            return Err(CostError::LengthMismatch {
                clean: clean.len(),
                estimate: estimate.len(),
            });
        }
        if clean.len() < 2 {
            return Err(CostError::TooShort(clean.len()));
        }
        let clean = centre(clean);
        let estimate = centre(estimate);
        let clean_norm = norm(&clean);
        let estimate_norm = norm(&estimate);
        if clean_norm < DEGENERACY_EPS {
            return Err(CostError::ZeroVariance {
                which: Operand::Clean,
                norm: clean_norm,
            });
        }
        if estimate_norm < DEGENERACY_EPS {
            return Err(CostError::ZeroVariance {
                which: Operand::Estimate,
                norm: estimate_norm,
            });
        }
        Ok(Self {
            clean,
            estimate,
            clean_norm,
            estimate_norm,
        })
    }

    fn correlation(&self) -> f64 {
        // sqrt of the product of squared norms keeps elc(x, x) exactly 1
        let cross = dot(&self.clean, &self.estimate);
        cross / (dot(&self.clean, &self.clean) * dot(&self.estimate, &self.estimate)).sqrt()
    }
}

fn centre(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Pearson correlation of the two vectors after mean removal.
pub fn elc(clean: &[f64], estimate: &[f64]) -> Result<f64, CostError> {
    Ok(Centred::new(clean, estimate)?.correlation())
}

/// ELC value and its gradient with respect to `estimate`.
///
/// Evaluated as `a / (|a| |b|) - L b / |b|^2` with `a`, `b` the centred clean
/// and estimate vectors. Wherever `a . b != 0` this is algebraically identical to
/// `L a / (b . a) - L b / (b . b)`; unlike that form it stays finite when the
/// vectors are uncorrelated.
pub fn elc_with_grad(clean: &[f64], estimate: &[f64]) -> Result<(f64, Vec<f64>), CostError> {
    let c = Centred::new(clean, estimate)?;
    let l = c.correlation();
    let inv_ab = 1.0 / (c.clean_norm * c.estimate_norm);
    let inv_bb = 1.0 / (c.estimate_norm * c.estimate_norm);
    let grad = c
        .clean
        .iter()
        .zip(&c.estimate)
        .map(|(a, b)| a * inv_ab - l * b * inv_bb)
        .collect();
    Ok((l, grad))
}

pub fn elc_grad(clean: &[f64], estimate: &[f64]) -> Result<Vec<f64>, CostError> {
    elc_with_grad(clean, estimate).map(|(_, g)| g)
}

/// Gradient evaluated term by term as `L (x_m - mu_x) / ((x^ - mu_x^) . (x - mu_x))
/// - L (x^_m - mu_x^) / |x^ - mu_x^|^2`. Rejects a numerically zero cross
/// inner product, where the first term is 0/0.
pub fn elc_grad_two_term(clean: &[f64], estimate: &[f64]) -> Result<Vec<f64>, CostError> {
    let c = Centred::new(clean, estimate)?;
    let cross = dot(&c.estimate, &c.clean);
    if cross.abs() < DEGENERACY_EPS {
        return Err(CostError::ZeroCrossCorrelation(cross));
    }
    let l = c.correlation();
    let bb = c.estimate_norm * c.estimate_norm;
    Ok(c
        .clean
        .iter()
        .zip(&c.estimate)
        .map(|(a, b)| l * a / cross - l * b / bb)
        .collect())
}

/// Closed-form gradient norm `sqrt(1 - L^2) / |x^ - mu_x^|`.
///
/// The norm in the denominator is that of the mean-removed estimate; with the
/// raw estimate norm the identity against [`elc_grad`] does not hold.
pub fn elc_grad_norm(clean: &[f64], estimate: &[f64]) -> Result<f64, CostError> {
    let c = Centred::new(clean, estimate)?;
    let l = c.correlation().clamp(-1.0, 1.0);
    Ok((1.0 - l * l).sqrt() / c.estimate_norm)
}

/// `(1/N) sum (estimate - clean)^2`.
pub fn emse(clean: &[f64], estimate: &[f64]) -> Result<f64, CostError> {
    check_lengths(clean, estimate)?;
    if clean.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = clean
        .iter()
        .zip(estimate)
        .map(|(x, y)| (y - x) * (y - x))
        .sum();
    Ok(sum / clean.len() as f64)
}

/// `(2/N) (estimate - clean)`.
pub fn emse_grad(clean: &[f64], estimate: &[f64]) -> Result<Vec<f64>, CostError> {
    check_lengths(clean, estimate)?;
    let scale = 2.0 / clean.len() as f64;
    Ok(clean
        .iter()
        .zip(estimate)
        .map(|(x, y)| scale * (y - x))
        .collect())
}

fn check_lengths(clean: &[f64], estimate: &[f64]) -> Result<(), CostError> {
    if clean.len() != estimate.len() {
        Err(CostError::LengthMismatch {
            clean: clean.len(),
            estimate: estimate.len(),
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
        let mut probe = at.to_vec();
        (0..at.len())
            .map(|i| {
                let orig = probe[i];
                probe[i] = orig + h;
                let up = f(&probe);
                probe[i] = orig - h;
                let down = f(&probe);
                probe[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(0.0..10.0)).collect()
    }

    #[test]
    fn elc_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 7.0];
        assert!((elc(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((elc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // centred: a = [-1.5,-.5,.5,1.5], b = [-1.5,.5,-.5,1.5]; a.b = 4, |a|^2 = |b|^2 = 5
        assert!((elc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            elc(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]),
            Err(CostError::ZeroVariance { which: Operand::Clean, .. })
        ));
        assert!(matches!(
            elc(&[1.0, 2.0, 3.0], &[0.0; 3]),
            Err(CostError::ZeroVariance { which: Operand::Estimate, .. })
        ));
        assert_eq!(elc(&[1.0], &[1.0]), Err(CostError::TooShort(1)));
        assert!(matches!(elc(&[1.0, 2.0], &[1.0]), Err(CostError::LengthMismatch { .. })));
        assert!(matches!(elc_grad(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(CostError::ZeroVariance { .. })));
    }

    #[test]
    fn optimum_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_vec(&mut rng, 30);
        let g = elc_grad(&x, &x).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(elc_grad_norm(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = random_vec(&mut rng, 30);
            let xh = random_vec(&mut rng, 30);
            let g = elc_grad(&x, &xh).unwrap();
            let fd = central_difference(|e| elc(&x, e).unwrap(), &xh, 1e-6);
            let scale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, n) in g.iter().zip(&fd) {
                assert!((a - n).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn both_gradient_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x = random_vec(&mut rng, 30);
            let xh = random_vec(&mut rng, 30);
            let a = elc_grad(&x, &xh).unwrap();
            let b = elc_grad_two_term(&x, &xh).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn two_term_form_rejects_uncorrelated_pair() {
        let x = [1.0, -1.0, 1.0, -1.0];
        let xh = [1.0, 1.0, -1.0, -1.0];
        assert_eq!(elc(&x, &xh).unwrap(), 0.0);
        assert!(matches!(
            elc_grad_two_term(&x, &xh),
            Err(CostError::ZeroCrossCorrelation(_))
        ));
        // the cancelled form is well defined there and has the predicted norm
        let g = elc_grad(&x, &xh).unwrap();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - elc_grad_norm(&x, &xh).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gradient_norm_examples() {
        // L = 0 and unit centred estimate norm
        let x = [1.0, -1.0, 1.0, -1.0];
        let xh = [0.5, 0.5, -0.5, -0.5];
        assert!((elc_grad_norm(&x, &xh).unwrap() - 1.0).abs() < 1e-15);
        let y = [0.3, 1.2, 5.0, 2.2];
        assert_eq!(elc_grad_norm(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn raw_estimate_norm_does_not_satisfy_the_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_vec(&mut rng, 30);
        let xh: Vec<f64> = random_vec(&mut rng, 30).iter().map(|v| v + 20.0).collect();
        let l = elc(&x, &xh).unwrap();
        let g = elc_grad(&x, &xh).unwrap();
        let measured = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let raw = (1.0 - l * l).sqrt() / xh.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((measured - raw).abs() > 1e-3 * measured);
        assert!((measured - elc_grad_norm(&x, &xh).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let g = elc_grad(&random_vec(&mut rng, 30), &random_vec(&mut rng, 30)).unwrap();
            assert!(g.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn emse_examples() {
        assert_eq!(emse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(emse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(emse_grad(&[0.0], &[2.0]).unwrap(), vec![4.0]);
        assert!(emse_grad(&[1.0, 5.0], &[1.0, 5.0]).unwrap().iter().all(|&v| v == 0.0));
        assert!(emse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn emse_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_vec(&mut rng, 30);
            let xh = random_vec(&mut rng, 30);
            let g = emse_grad(&x, &xh).unwrap();
            let fd = central_difference(|e| emse(&x, e).unwrap(), &xh, 1e-4);
            for (a, n) in g.iter().zip(&fd) {
                assert!((a - n).abs() <= 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn elc_is_bounded(
            x in prop::collection::vec(-100.0f64..100.0, 30),
            y in prop::collection::vec(-100.0f64..100.0, 30),
        ) {
            if let Ok(l) = elc(&x, &y) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&l));
            }
        }

        #[test]
        fn elc_affine_invariance(
            x in prop::collection::vec(0.0f64..10.0, 30),
            y in prop::collection::vec(0.0f64..10.0, 30),
            a in 0.01f64..50.0,
            b in -20.0f64..20.0,
        ) {
            let base = elc(&x, &y).unwrap();
            let pos: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let neg: Vec<f64> = y.iter().map(|v| -a * v + b).collect();
            prop_assert!((elc(&x, &pos).unwrap() - base).abs() < 1e-12);
            prop_assert!((elc(&x, &neg).unwrap() + base).abs() < 1e-12);
        }

        #[test]
        fn gradient_norm_identity(
            x in prop::collection::vec(0.0f64..10.0, 30),
            y in prop::collection::vec(0.0f64..10.0, 30),
        ) {
            let g = elc_grad(&x, &y).unwrap();
            let measured = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((measured - elc_grad_norm(&x, &y).unwrap()).abs() <= 1e-9 * measured.max(1.0));
        }
    }
}
