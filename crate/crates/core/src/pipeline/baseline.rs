//! Classical baseline: one network maps 30 frames of log STFT magnitudes to
//! sigmoid gains for the last 5 frames, trained on the magnitude MSE.
//! Overlapping per-frame estimates are averaged.

use std::path::Path;

use ndarray::{s, Array2};

use super::enhance::enhance_with_bin_gains;
use super::PipelineError;
use crate::binfmt::{self, Decoder, Encoder};
use crate::features::{FeatureNorm, FeatureStats};
use crate::mixing::MixedUtterance;
use crate::neural::{
    load_model_checked, save_model, train, MlpModel, Mode, ModelShape, Objective, TrainConfig, TrainReport,
    TrainingData,
};
use crate::signal::TimeSignal;
use crate::stft::{Stft, StftConfig};

pub const BASELINE_CONTEXT_IN: usize = 30;
pub const BASELINE_CONTEXT_OUT: usize = 5;
const BASELINE_MAGIC: &[u8; 5] = b"ASTBL";
const BASELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralUtterance {
    /// `frames x bins` magnitudes.
    pub clean: Array2<f64>,
    pub noisy: Array2<f64>,
    pub log_noisy: Array2<f64>,
}

/// Magnitude spectrograms of aligned clean/noisy pairs with an index of
/// every frame that has a full input context.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    pub utterances: Vec<SpectralUtterance>,
    pub context_in: usize,
    pub context_out: usize,
    pub bins: usize,
    index: Vec<(usize, usize)>,
}

impl SpectralDataset {
    pub fn from_mixtures(
        mixtures: &[MixedUtterance],
        config: StftConfig,
        context_in: usize,
        context_out: usize,
    ) -> Result<Self, PipelineError> {
        if context_out == 0 || context_out > context_in {
            return Err(PipelineError::Invalid(format!(
                "output context {context_out} with input context {context_in}"
            )));
        }
        let stft = Stft::new(config)?;
        let mut utterances = Vec::with_capacity(mixtures.len());
        let mut index = Vec::new();
        for (u, m) in mixtures.iter().enumerate() {
            let clean = stft.analyze(&m.clean.samples)?.magnitude;
            let noisy = stft.analyze(&m.noisy.samples)?.magnitude;
            index.extend((context_in - 1..noisy.nrows()).map(|f| (u, f)));
            let log_noisy = noisy.mapv(f64::ln_1p);
            utterances.push(SpectralUtterance { clean, noisy, log_noisy });
        }
        Ok(Self {
            utterances,
            context_in,
            context_out,
            bins: config.num_bins(),
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn features_into(&self, log_noisy: &Array2<f64>, frame: usize, out: &mut [f64]) {
        let start = frame + 1 - self.context_in;
        let block = log_noisy.slice(s![start..=frame, ..]);
        for (o, v) in out.iter_mut().zip(block.iter()) {
            *o = *v;
        }
    }

    pub fn fit_feature_norm(&self) -> FeatureNorm {
        let dim = self.context_in * self.bins;
        let mut stats = FeatureStats::new(dim);
        let mut buf = vec![0.0; dim];
        for &(u, f) in &self.index {
            self.features_into(&self.utterances[u].log_noisy, f, &mut buf);
            stats.push(&buf);
        }
        stats.finish()
    }
}

pub struct SpectralTrainingData<'a> {
    pub dataset: &'a SpectralDataset,
    pub norm: &'a FeatureNorm,
}

impl TrainingData for SpectralTrainingData<'_> {
    fn len(&self) -> usize {
        self.dataset.len()
    }

    fn input_dim(&self) -> usize {
        self.dataset.context_in * self.dataset.bins
    }

    fn output_dim(&self) -> usize {
        self.dataset.context_out * self.dataset.bins
    }

    fn fill(&self, index: usize, input: &mut [f64], clean: &mut [f64], noisy: &mut [f64]) {
        let (u, f) = self.dataset.index[index];
        let utt = &self.dataset.utterances[u];
        self.dataset.features_into(&utt.log_noisy, f, input);
        self.norm.apply(input);
        let start = f + 1 - self.dataset.context_out;
        for (o, v) in clean.iter_mut().zip(utt.clean.slice(s![start..=f, ..]).iter()) {
            *o = *v;
        }
        for (o, v) in noisy.iter_mut().zip(utt.noisy.slice(s![start..=f, ..]).iter()) {
            *o = *v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSystem {
    pub model: MlpModel,
    pub stft: StftConfig,
    pub feature_norm: FeatureNorm,
    pub context_in: usize,
    pub context_out: usize,
}

impl ClassicalSystem {
    pub fn bins(&self) -> usize {
        self.stft.num_bins()
    }

    /// Averaged `frames x bins` gains; frames no estimate reaches get zero.
    pub fn bin_gains(&self, magnitude: &Array2<f64>) -> Result<Array2<f64>, PipelineError> {
        let (frames, bins) = magnitude.dim();
        if frames < self.context_in {
            return Err(PipelineError::TooShort {
                needed: self.context_in,
                available: frames,
            });
        }
        let log_noisy = magnitude.mapv(f64::ln_1p);
        let windows = frames + 1 - self.context_in;
        let mut rows = Array2::zeros((windows, self.context_in * bins));
        for (w, mut row) in rows.rows_mut().into_iter().enumerate() {
            let out = row.as_slice_mut().expect("standard layout");
            let block = log_noisy.slice(s![w..w + self.context_in, ..]);
            for (o, v) in out.iter_mut().zip(block.iter()) {
                *o = *v;
            }
            self.feature_norm.apply(out);
        }
        let outputs = self.model.forward(&rows, Mode::Infer)?;
        let mut sum = Array2::<f64>::zeros((frames, bins));
        let mut count = vec![0usize; frames];
        for w in 0..windows {
            let first = w + self.context_in - self.context_out;
            for i in 0..self.context_out {
                let row = outputs.slice(s![w, i * bins..(i + 1) * bins]);
                sum.row_mut(first + i).zip_mut_with(&row, |a, b| *a += b);
                count[first + i] += 1;
            }
        }
        for (mut row, &c) in sum.rows_mut().into_iter().zip(&count) {
            if c > 0 {
                row.mapv_inplace(|v| v / c as f64);
            }
        }
        Ok(sum)
    }

    pub fn enhance(&self, noisy: &TimeSignal) -> Result<TimeSignal, PipelineError> {
        let stft = Stft::new(self.stft)?;
        // enough leading zeros that the first real frame is already covered
        enhance_with_bin_gains(noisy, &stft, self.context_in - self.context_out, |spec| {
            self.bin_gains(&spec.magnitude)
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io(dir.display().to_string(), e))?;
        let mut e = Encoder::new(BASELINE_MAGIC, BASELINE_VERSION);
        e.u32(self.stft.fft_size as u32);
        e.u32(self.stft.window_len as u32);
        e.u32(self.stft.hop as u32);
        e.u32(self.context_in as u32);
        e.u32(self.context_out as u32);
        e.u32(self.feature_norm.dim() as u32);
        e.f64s(&self.feature_norm.mean);
        e.f64s(&self.feature_norm.std);
        e.write_to(&dir.join("baseline.bin"))?;
        save_model(&self.model, Objective::SpectralMse, dir.join("baseline.model"))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        let bytes = binfmt::read_file(&dir.join("baseline.bin"))?;
        let mut d = Decoder::new(&bytes, BASELINE_MAGIC, BASELINE_VERSION)?;
        let stft = StftConfig::new(
            d.u32("fft size")? as usize,
            d.u32("window length")? as usize,
            d.u32("hop")? as usize,
        )?;
        let context_in = d.u32("input context")? as usize;
        let context_out = d.u32("output context")? as usize;
        let dim = d.u32("feature dims")? as usize;
        let mean = d.f64s(dim, "feature mean")?;
        let std = d.f64s(dim, "feature std")?;
        d.finish()?;
        let bins = stft.num_bins();
        if dim != context_in * bins || context_out == 0 || context_out > context_in {
            return Err(PipelineError::Invalid("baseline header is inconsistent".into()));
        }
        let (model, _) = load_model_checked(dir.join("baseline.model"), dim, context_out * bins)?;
        Ok(Self {
            model,
            stft,
            feature_norm: FeatureNorm { mean, std },
            context_in,
            context_out,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSettings {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub train: TrainConfig,
}

impl ClassicalSettings {
    pub fn new(hidden_width: usize) -> Self {
        Self {
            hidden_width,
            hidden_layers: 3,
            train: TrainConfig::for_objective(Objective::SpectralMse),
        }
    }
}

pub fn train_classical(
    train_set: &SpectralDataset,
    validation_set: &SpectralDataset,
    stft: StftConfig,
    settings: &ClassicalSettings,
) -> Result<(ClassicalSystem, TrainReport), PipelineError> {
    if settings.train.objective != Objective::SpectralMse {
        return Err(PipelineError::Invalid("the baseline trains on the spectral MSE".into()));
    }
    if train_set.bins != stft.num_bins() || validation_set.bins != train_set.bins {
        return Err(PipelineError::ConfigMismatch("bin counts differ".into()));
    }
    let norm = train_set.fit_feature_norm();
    let bins = train_set.bins;
    let shape = ModelShape {
        input_dim: train_set.context_in * bins,
        hidden: vec![settings.hidden_width; settings.hidden_layers],
        output_dim: train_set.context_out * bins,
    };
    let model = MlpModel::init(&shape, settings.train.seed);
    let tr = SpectralTrainingData {
        dataset: train_set,
        norm: &norm,
    };
    let va = SpectralTrainingData {
        dataset: validation_set,
        norm: &norm,
    };
    // the MSE is taken per frame of magnitudes
    let (model, report) = train(model, &tr, &va, &settings.train, bins)?;
    Ok((
        ClassicalSystem {
            model,
            stft,
            feature_norm: norm,
            context_in: train_set.context_in,
            context_out: train_set.context_out,
        },
        report,
    ))
}
