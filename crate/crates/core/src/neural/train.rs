//! Minibatch SGD with validation-driven learning-rate decay.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{batch_loss, loss_gradients, LossSpec, Objective};
use super::mlp::{MlpModel, Mode};
use super::NeuralError;

/// Rows for supervised training: network input plus the clean and noisy
/// targets the output gains are scored against.
pub trait TrainingData {
    fn len(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Writes row `index` into the three buffers.
    fn fill(&self, index: usize, input: &mut [f64], clean: &mut [f64], noisy: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A gathered minibatch.
pub struct Batch {
    pub inputs: Array2<f64>,
    pub clean: Array2<f64>,
    pub noisy: Array2<f64>,
}

impl Batch {
    pub fn gather(data: &dyn TrainingData, indices: &[usize]) -> Self {
        let (n, din, dout) = (indices.len(), data.input_dim(), data.output_dim());
        let mut inputs = Array2::zeros((n, din));
        let mut clean = Array2::zeros((n, dout));
        let mut noisy = Array2::zeros((n, dout));
        for (r, &i) in indices.iter().enumerate() {
            data.fill(
                i,
                inputs.row_mut(r).as_slice_mut().unwrap(),
                clean.row_mut(r).as_slice_mut().unwrap(),
                noisy.row_mut(r).as_slice_mut().unwrap(),
            );
        }
        Self {
            inputs,
            clean,
            noisy,
        }
    }
}

/// Fully materialized rows.
#[derive(Debug, Clone)]
pub struct DenseData {
    pub inputs: Array2<f64>,
    pub clean: Array2<f64>,
    pub noisy: Array2<f64>,
}

impl TrainingData for DenseData {
    fn len(&self) -> usize {
        self.inputs.nrows()
    }
    fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }
    fn output_dim(&self) -> usize {
        self.clean.ncols()
    }
    fn fill(&self, index: usize, input: &mut [f64], clean: &mut [f64], noisy: &mut [f64]) {
        input.copy_from_slice(self.inputs.row(index).as_slice().unwrap());
        clean.copy_from_slice(self.clean.row(index).as_slice().unwrap());
        noisy.copy_from_slice(self.noisy.row(index).as_slice().unwrap());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Step size per sample: an update is `lr * (sum of sample gradients)`.
    pub initial_lr_per_sample: f64,
    pub lr_decay: f64,
    pub lr_floor: f64,
    pub max_epochs: usize,
    pub minibatch: usize,
    pub objective: Objective,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_objective(objective: Objective) -> Self {
        Self {
            initial_lr_per_sample: default_lr(objective),
            lr_decay: 0.7,
            lr_floor: 1e-10,
            max_epochs: 200,
            minibatch: 256,
            objective,
            seed: 0,
        }
    }
}

pub fn default_lr(objective: Objective) -> f64 {
    match objective {
        Objective::Elc => 0.01,
        Objective::Emse | Objective::SpectralMse => 5e-5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    LrFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub train_cost: f64,
    pub validation_cost: f64,
    /// Learning rate in effect after this epoch's schedule update.
    pub lr: f64,
    /// Degenerate segments skipped during the epoch.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    /// Index of the epoch whose model was returned.
    pub best_epoch: Option<usize>,
}

/// Decays the rate whenever a validation cost exceeds the best seen so far.
#[derive(Debug, Clone)]
pub struct LrSchedule {
    lr: f64,
    decay: f64,
    floor: f64,
    best: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub improved: bool,
    pub lr: f64,
    pub stop: bool,
}

impl LrSchedule {
    pub fn new(initial: f64, decay: f64, floor: f64) -> Self {
        Self {
            lr: initial,
            decay,
            floor,
            best: f64::INFINITY,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn observe(&mut self, validation_cost: f64) -> Step {
        let improved = validation_cost <= self.best;
        if improved {
            self.best = validation_cost;
        } else {
            self.lr *= self.decay;
        }
        Step {
            improved,
            lr: self.lr,
            stop: self.lr < self.floor,
        }
    }
}

/// Mean segment cost of `model` over `data` in inference mode.
pub fn evaluate(model: &MlpModel, data: &dyn TrainingData, spec: LossSpec) -> Result<f64, NeuralError> {
    const CHUNK: usize = 1024;
    let mut total = 0.0;
    let mut counted = 0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(CHUNK) {
        let batch = Batch::gather(data, chunk);
        let out = model.forward(&batch.inputs, Mode::Infer)?;
        let loss = batch_loss(spec, &out, &batch.clean, &batch.noisy, None)?;
        total += loss.total;
        counted += loss.counted;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

/// Trains `model` and returns the parameters with the lowest validation cost.
pub fn train(
    model: MlpModel,
    train_set: &dyn TrainingData,
    validation_set: &dyn TrainingData,
    config: &TrainConfig,
    segment_len: usize,
) -> Result<(MlpModel, TrainReport), NeuralError> {
    if train_set.is_empty() || validation_set.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    for data in [train_set, validation_set] {
        if data.input_dim() != model.input_dim() || data.output_dim() != model.output_dim() {
            return Err(NeuralError::Dimension {
                expected: model.input_dim(),
                found: data.input_dim(),
            });
        }
    }
    if config.minibatch == 0 {
        return Err(NeuralError::Config("minibatch must be positive".into()));
    }
    let spec = LossSpec::new(config.objective, segment_len);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut schedule = LrSchedule::new(config.initial_lr_per_sample, config.lr_decay, config.lr_floor);
    let mut current = model;
    let mut best = current.clone();
    let mut report = TrainReport {
        epochs: Vec::new(),
        stop_reason: StopReason::MaxEpochs,
        best_epoch: None,
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut counted = 0;
        let mut skipped = 0;
        for (b, chunk) in order.chunks(config.minibatch).enumerate() {
            // batch statistics of a single row are meaningless
            if chunk.len() < 2 {
                continue;
            }
            let batch = Batch::gather(train_set, chunk);
            let (loss, grads, cache) =
                loss_gradients(&current, &batch.inputs, &batch.clean, &batch.noisy, spec, None)?;
            if !loss.total.is_finite() || !grads.is_finite() {
                return Err(NeuralError::NonFinite { epoch, batch: b });
            }
            total += loss.total;
            counted += loss.counted;
            skipped += loss.skipped;
            current.update_running_stats(&cache);
            current.apply_gradients(&grads, schedule.lr());
        }
        let train_cost = if counted == 0 { 0.0 } else { total / counted as f64 };
        let validation_cost = evaluate(&current, validation_set, spec)?;
        if !validation_cost.is_finite() {
            return Err(NeuralError::NonFinite { epoch, batch: usize::MAX });
        }
        let step = schedule.observe(validation_cost);
        if step.improved {
            best = current.clone();
            report.best_epoch = Some(epoch);
        }
        log::info!(
            "epoch {epoch}: train {train_cost:.6} validation {validation_cost:.6} lr {:.3e}{}",
            step.lr,
            if skipped > 0 { format!(" ({skipped} degenerate skipped)") } else { String::new() }
        );
        report.epochs.push(EpochRecord {
            train_cost,
            validation_cost,
            lr: step.lr,
            skipped,
        });
        if step.stop {
            report.stop_reason = StopReason::LrFloor;
            break;
        }
    }
    Ok((best, report))
}
