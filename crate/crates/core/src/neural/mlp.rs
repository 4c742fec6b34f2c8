use ndarray::{Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NeuralError;

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics in batch norm.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl ModelShape {
    /// Three hidden layers of `width` units.
    pub fn three_hidden(input_dim: usize, width: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![width; 3],
            output_dim,
        }
    }
}

/// Feed-forward network: `Dense -> BatchNorm -> ReLU` hidden layers and a
/// sigmoid output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
    /// One per hidden layer, applied to its pre-activations.
    pub norms: Vec<BatchNorm>,
}

/// Intermediate values of a training-mode forward pass.
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Normalized pre-activations and inverse std of each hidden layer.
    normalized: Vec<(Array2<f64>, Array1<f64>)>,
    /// Post-activation of each layer (the last one is the network output).
    outputs: Vec<Array2<f64>>,
    /// Batch mean and variance of each hidden layer.
    pub batch_stats: Vec<(Array1<f64>, Array1<f64>)>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("network has at least one layer")
    }
}

/// Parameter gradients, laid out like [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
    pub gamma: Vec<Array1<f64>>,
    pub beta: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| Array2::zeros(l.weights.dim())).collect(),
            bias: model.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            gamma: model.norms.iter().map(|n| Array1::zeros(n.gamma.len())).collect(),
            beta: model.norms.iter().map(|n| Array1::zeros(n.beta.len())).collect(),
        }
    }

    /// Flat views in the same order as [`MlpModel::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        for (g, b) in self.gamma.iter().zip(&self.beta) {
            out.push(g.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    /// He-uniform weights for ReLU layers, Xavier-uniform for the sigmoid
    /// output, zero biases, identity batch norm.
    pub fn init(shape: &ModelShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![shape.input_dim];
        dims.extend(&shape.hidden);
        dims.push(shape.output_dim);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let (activation, bound) = if i == last {
                    (Activation::Sigmoid, (6.0 / (fan_in + fan_out) as f64).sqrt())
                } else {
                    (Activation::Relu, (6.0 / fan_in as f64).sqrt())
                };
                let weights =
                    Array2::from_shape_simple_fn((fan_out, fan_in), || rng.gen_range(-bound..bound));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        let norms = shape.hidden.iter().map(|&d| BatchNorm::identity(d)).collect();
        Self { layers, norms }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::output_dim)
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.input_dim(),
            hidden: self.layers[..self.layers.len() - 1]
                .iter()
                .map(Dense::output_dim)
                .collect(),
            output_dim: self.output_dim(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parameters()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
            && self
                .norms
                .iter()
                .all(|n| n.running_mean.iter().chain(&n.running_var).all(|v| v.is_finite()))
    }

    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(l.weights.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        for n in &self.norms {
            out.push(n.gamma.as_slice().expect("standard layout"));
            out.push(n.beta.as_slice().expect("standard layout"));
        }
        out
    }

    /// Trainable parameters as flat mutable slices: per layer weights then bias,
    /// then per batch-norm gamma then beta.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weights.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        for n in &mut self.norms {
            out.push(n.gamma.as_slice_mut().expect("standard layout"));
            out.push(n.beta.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum::<usize>()
            + self.norms.iter().map(|n| 2 * n.gamma.len()).sum::<usize>()
    }

    fn check_input(&self, batch: &Array2<f64>) -> Result<(), NeuralError> {
        if batch.ncols() != self.input_dim() {
            return Err(NeuralError::Dimension {
                expected: self.input_dim(),
                found: batch.ncols(),
            });
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFiniteInput);
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Array2<f64>, mode: Mode) -> Result<Array2<f64>, NeuralError> {
        match mode {
            Mode::Train => Ok(self.forward_train(batch)?.outputs.pop().unwrap()),
            Mode::Infer => {
                self.check_input(batch)?;
                let mut x = batch.to_owned();
                for (i, layer) in self.layers.iter().enumerate() {
                    let mut z = x.dot(&layer.weights.t()) + &layer.bias;
                    match layer.activation {
                        Activation::Relu => {
                            let n = &self.norms[i];
                            let scale = n.running_var.mapv(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt());
                            Zip::from(z.rows_mut()).for_each(|mut row| {
                                Zip::from(&mut row)
                                    .and(&n.running_mean)
                                    .and(&scale)
                                    .and(&n.gamma)
                                    .and(&n.beta)
                                    .for_each(|v, &m, &s, &g, &b| {
                                        *v = ((*v - m) * s * g + b).max(0.0);
                                    });
                            });
                        }
                        Activation::Sigmoid => z.mapv_inplace(sigmoid),
                    }
                    x = z;
                }
                Ok(x)
            }
        }
    }

    /// Training-mode forward pass keeping what [`MlpModel::backward`] needs.
    pub fn forward_train(&self, batch: &Array2<f64>) -> Result<ForwardCache, NeuralError> {
        self.check_input(batch)?;
        let rows = batch.nrows() as f64;
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            normalized: Vec::with_capacity(self.norms.len()),
            outputs: Vec::with_capacity(self.layers.len()),
            batch_stats: Vec::with_capacity(self.norms.len()),
        };
        let mut x = batch.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weights.t()) + &layer.bias;
            cache.inputs.push(x);
            match layer.activation {
                Activation::Relu => {
                    let n = &self.norms[i];
                    let mean = z.sum_axis(Axis(0)) / rows;
                    z -= &mean;
                    let var = z.mapv(|v| v * v).sum_axis(Axis(0)) / rows;
                    let inv_std = var.mapv(|v| 1.0 / (v + BATCH_NORM_EPS).sqrt());
                    z *= &inv_std;
                    let mut a = &z * &n.gamma + &n.beta;
                    a.mapv_inplace(|v| v.max(0.0));
                    cache.normalized.push((z, inv_std));
                    cache.batch_stats.push((mean, var));
                    x = a;
                }
                Activation::Sigmoid => {
                    z.mapv_inplace(sigmoid);
                    x = z;
                }
            }
            cache.outputs.push(x.clone());
        }
        Ok(cache)
    }

    /// Back-propagates `d_output` (gradient of the batch loss with respect to
    /// the network output) through a training-mode pass.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Array2<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let rows = d_output.nrows() as f64;
        let mut upstream = d_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let out = &cache.outputs[i];
            let dz = match layer.activation {
                Activation::Sigmoid => {
                    let mut dz = upstream;
                    Zip::from(&mut dz).and(out).for_each(|d, &s| *d *= s * (1.0 - s));
                    dz
                }
                Activation::Relu => {
                    let n = &self.norms[i];
                    let (xhat, inv_std) = &cache.normalized[i];
                    let mut dy = upstream;
                    Zip::from(&mut dy).and(out).for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                    grads.beta[i] = dy.sum_axis(Axis(0));
                    grads.gamma[i] = (&dy * xhat).sum_axis(Axis(0));
                    let dxhat = &dy * &n.gamma;
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                    let mut dz = dxhat * rows;
                    dz -= &sum_dxhat;
                    dz -= &(xhat * &sum_dxhat_xhat);
                    dz *= &(inv_std / rows);
                    dz
                }
            };
            grads.weights[i] = dz.t().dot(&cache.inputs[i]);
            grads.bias[i] = dz.sum_axis(Axis(0));
            if i > 0 {
                upstream = dz.dot(&layer.weights);
            } else {
                break;
            }
        }
        grads
    }

    /// Folds the batch statistics of a training pass into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (n, (mean, var)) in self.norms.iter_mut().zip(&cache.batch_stats) {
            n.running_mean = &n.running_mean * BATCH_NORM_MOMENTUM + mean * (1.0 - BATCH_NORM_MOMENTUM);
            n.running_var = &n.running_var * BATCH_NORM_MOMENTUM + var * (1.0 - BATCH_NORM_MOMENTUM);
        }
    }

    /// `params -= lr * grads`
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.parameters_mut().into_iter().zip(grads.slices()) {
            for (a, b) in p.iter_mut().zip(g) {
                *a -= lr * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpModel {
        MlpModel::init(&ModelShape { input_dim: 6, hidden: vec![4, 4, 4], output_dim: 3 }, 1)
    }

    #[test]
    fn zero_model_outputs_one_half() {
        let mut m = tiny();
        for l in &mut m.layers {
            l.weights.fill(0.0);
        }
        let x = Array2::from_shape_fn((5, 6), |(i, j)| (i * 7 + j) as f64 * 0.1);
        for mode in [Mode::Train, Mode::Infer] {
            let y = m.forward(&x, mode).unwrap();
            assert!(y.iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = tiny();
        assert!(matches!(
            m.forward(&Array2::zeros((2, 5)), Mode::Infer),
            Err(NeuralError::Dimension { expected: 6, found: 5 })
        ));
    }

    #[test]
    fn init_is_seeded_and_scaled() {
        let shape = ModelShape::three_hidden(512, 512, 30);
        let a = MlpModel::init(&shape, 9);
        assert_eq!(a, MlpModel::init(&shape, 9));
        assert_ne!(a, MlpModel::init(&shape, 10));
        // He-uniform: variance 2 / fan_in
        let w = &a.layers[1].weights;
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let target = 2.0 / 512.0;
        assert!((var - target).abs() < 0.2 * target, "{var}");
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        assert!(a.norms.iter().all(|n| n.gamma.iter().all(|&g| g == 1.0)));
        // Xavier bound on the sigmoid layer
        let bound = (6.0_f64 / (512.0 + 30.0)).sqrt();
        assert!(a.layers[3].weights.iter().all(|v| v.abs() <= bound));
        assert_eq!(a.layers[3].activation, Activation::Sigmoid);
    }

    #[test]
    fn infer_rows_are_independent() {
        let mut m = tiny();
        for n in &mut m.norms {
            n.running_mean.fill(0.3);
            n.running_var.fill(2.0);
        }
        let x = Array2::from_shape_fn((4, 6), |(i, j)| ((i + 1) * (j + 2)) as f64 * 0.05);
        let full = m.forward(&x, Mode::Infer).unwrap();
        for i in 0..4 {
            let single = m.forward(&x.slice(ndarray::s![i..i + 1, ..]).to_owned(), Mode::Infer).unwrap();
            assert_eq!(single.row(0), full.row(i));
        }
        let same = Array2::from_shape_fn((3, 6), |(_, j)| j as f64);
        let out = m.forward(&same, Mode::Infer).unwrap();
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(1), out.row(2));
    }

    #[test]
    fn running_stats_move_toward_batch_stats() {
        let mut m = tiny();
        let x = Array2::from_shape_fn((8, 6), |(i, j)| (i as f64 - j as f64) * 0.3);
        let cache = m.forward_train(&x).unwrap();
        let (mean, var) = cache.batch_stats[0].clone();
        m.update_running_stats(&cache);
        for k in 0..4 {
            assert!((m.norms[0].running_mean[k] - 0.1 * mean[k]).abs() < 1e-15);
            assert!((m.norms[0].running_var[k] - (0.9 + 0.1 * var[k])).abs() < 1e-15);
        }
    }
}
