//! A trained enhancement system: one gain network per band (or one joint
//! network), the feature normalization, and the analysis settings.

use std::path::Path;

use ndarray::Array2;

use super::enhance::enhance_with_band_gains;
use super::PipelineError;
use crate::binfmt::{self, Decoder, Encoder};
use crate::features::{frame_features_into, log_envelopes, FeatureNorm};
use crate::mixing::{derive_seed, BandTarget, BandTrainingData, EnvelopeDataset};
use crate::neural::{
    load_model_checked, save_model, train, MlpModel, Mode, ModelShape, Objective, TrainConfig, TrainReport,
};
use crate::octave::{
    average_overlapping_gains, build_band_layout_with, BandLayout, EnvelopeMatrix, GainVector, OutOfBandPolicy,
};
use crate::signal::TimeSignal;
use crate::stft::{Stft, StftConfig};

pub const SYSTEM_MAGIC: &[u8; 5] = b"ASTSY";
pub const SYSTEM_VERSION: u32 = 1;
const SYSTEM_FILE: &str = "system.bin";

#[derive(Debug, Clone, PartialEq)]
pub enum BandModels {
    PerBand(Vec<MlpModel>),
    /// One network with `bands * context` outputs, band major.
    Joint(MlpModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementSystem {
    pub models: BandModels,
    pub layout: BandLayout,
    pub stft: StftConfig,
    pub feature_norm: FeatureNorm,
    pub objective: Objective,
    pub context: usize,
}

impl EnhancementSystem {
    pub fn new(
        models: BandModels,
        layout: BandLayout,
        stft: StftConfig,
        feature_norm: FeatureNorm,
        objective: Objective,
        context: usize,
    ) -> Result<Self, PipelineError> {
        let system = Self {
            models,
            layout,
            stft,
            feature_norm,
            objective,
            context,
        };
        system.validate()?;
        Ok(system)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let bands = self.layout.num_bands();
        let input = bands * self.context;
        if self.feature_norm.dim() != input || self.feature_norm.std.len() != input {
            return Err(PipelineError::Invalid(format!(
                "feature normalization has {} dims, networks take {input}",
                self.feature_norm.dim()
            )));
        }
        let check = |m: &MlpModel, out: usize| {
            if m.input_dim() != input || m.output_dim() != out {
                Err(PipelineError::Invalid(format!(
                    "network {}->{} where {input}->{out} is required",
                    m.input_dim(),
                    m.output_dim()
                )))
            } else {
                Ok(())
            }
        };
        match &self.models {
            BandModels::PerBand(ms) => {
                if ms.len() != bands {
                    return Err(PipelineError::Invalid(format!("{} networks for {bands} bands", ms.len())));
                }
                ms.iter().try_for_each(|m| check(m, self.context))
            }
            BandModels::Joint(m) => check(m, input),
        }
    }

    pub fn is_joint(&self) -> bool {
        matches!(self.models, BandModels::Joint(_))
    }

    /// Normalized network inputs for every full window, one row per window
    /// ending at frame `context - 1 + row`.
    fn feature_rows(&self, noisy_env: &EnvelopeMatrix) -> Result<Array2<f64>, PipelineError> {
        let frames = noisy_env.num_frames();
        if frames < self.context {
            return Err(PipelineError::TooShort {
                needed: self.context,
                available: frames,
            });
        }
        let windows = frames + 1 - self.context;
        let log_env = log_envelopes(noisy_env);
        let mut rows = Array2::zeros((windows, self.feature_norm.dim()));
        for (w, mut row) in rows.rows_mut().into_iter().enumerate() {
            let out = row.as_slice_mut().expect("standard layout");
            frame_features_into(&log_env, w + self.context - 1, self.context, out);
            self.feature_norm.apply(out);
        }
        Ok(rows)
    }

    /// Raw gain vectors: per band, `windows x context` network outputs.
    pub fn window_gains(&self, noisy_env: &EnvelopeMatrix) -> Result<Vec<Array2<f64>>, PipelineError> {
        let rows = self.feature_rows(noisy_env)?;
        let n = self.context;
        Ok(match &self.models {
            BandModels::PerBand(ms) => ms
                .iter()
                .map(|m| m.forward(&rows, Mode::Infer))
                .collect::<Result<_, _>>()?,
            BandModels::Joint(m) => {
                let out = m.forward(&rows, Mode::Infer)?;
                (0..self.layout.num_bands())
                    .map(|j| out.slice(ndarray::s![.., j * n..(j + 1) * n]).to_owned())
                    .collect()
            }
        })
    }

    /// Per-frame band gains, averaging every estimate that covers a frame.
    pub fn band_gains(&self, noisy_env: &EnvelopeMatrix) -> Result<Array2<f64>, PipelineError> {
        let frames = noisy_env.num_frames();
        let per_band = self.window_gains(noisy_env)?;
        let mut gains = Array2::zeros((self.layout.num_bands(), frames));
        for (j, outputs) in per_band.iter().enumerate() {
            let vectors: Vec<GainVector> = outputs
                .rows()
                .into_iter()
                .enumerate()
                .map(|(w, row)| GainVector {
                    values: row.to_vec(),
                    band: j,
                    frame: w + self.context - 1,
                })
                .collect();
            let averaged = average_overlapping_gains(&vectors, frames)?;
            gains.row_mut(j).assign(&ndarray::Array1::from(averaged));
        }
        Ok(gains)
    }

    /// Noisy signal at the working rate to an enhanced signal of equal length.
    pub fn enhance(&self, noisy: &TimeSignal) -> Result<TimeSignal, PipelineError> {
        let stft = Stft::new(self.stft)?;
        let config = stft.config();
        // shortest input whose padded analysis has `context` frames
        let needed = config.span(self.context) + 1 - 2 * config.hop;
        if noisy.len() < needed {
            return Err(PipelineError::TooShort {
                needed,
                available: noisy.len(),
            });
        }
        enhance_with_band_gains(noisy, &stft, &self.layout, OutOfBandPolicy::Zero, 0, |_, env| {
            self.band_gains(env)
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io(dir.display().to_string(), e))?;
        let mut e = Encoder::new(SYSTEM_MAGIC, SYSTEM_VERSION);
        e.u32(self.stft.fft_size as u32);
        e.u32(self.stft.window_len as u32);
        e.u32(self.stft.hop as u32);
        e.u32(self.layout.sample_rate_hz);
        e.u32(self.layout.num_bands() as u32);
        e.f64(self.layout.bands[0].center_hz);
        e.u32(self.context as u32);
        e.u8(u8::from(self.is_joint()));
        e.u8(self.objective.tag());
        e.u32(self.feature_norm.dim() as u32);
        e.f64s(&self.feature_norm.mean);
        e.f64s(&self.feature_norm.std);
        e.write_to(&dir.join(SYSTEM_FILE))?;
        match &self.models {
            BandModels::PerBand(ms) => {
                for (j, m) in ms.iter().enumerate() {
                    save_model(m, self.objective, dir.join(band_file(j)))?;
                }
            }
            BandModels::Joint(m) => save_model(m, self.objective, dir.join("joint.model"))?,
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        let bytes = binfmt::read_file(&dir.join(SYSTEM_FILE))?;
        let mut d = Decoder::new(&bytes, SYSTEM_MAGIC, SYSTEM_VERSION)?;
        let fft_size = d.u32("fft size")? as usize;
        let window_len = d.u32("window length")? as usize;
        let hop = d.u32("hop")? as usize;
        let rate = d.u32("sample rate")?;
        let bands = d.u32("band count")? as usize;
        let first_center = d.f64("first band centre")?;
        let context = d.u32("context")? as usize;
        let joint = d.u8("joint flag")? == 1;
        let tag = d.u8("objective")?;
        let dim = d.u32("feature dims")? as usize;
        let mean = d.f64s(dim, "feature mean")?;
        let std = d.f64s(dim, "feature std")?;
        d.finish()?;
        let objective =
            Objective::from_tag(tag).ok_or_else(|| PipelineError::Invalid(format!("objective tag {tag}")))?;
        let stft = StftConfig::new(fft_size, window_len, hop)?;
        let layout = build_band_layout_with(fft_size, rate, bands, first_center)?;
        let input = bands * context;
        let models = if joint {
            BandModels::Joint(load_model_checked(dir.join("joint.model"), input, input)?.0)
        } else {
            BandModels::PerBand(
                (0..bands)
                    .map(|j| Ok(load_model_checked(dir.join(band_file(j)), input, context)?.0))
                    .collect::<Result<_, PipelineError>>()?,
            )
        };
        Self::new(models, layout, stft, FeatureNorm { mean, std }, objective, context)
    }
}

fn band_file(j: usize) -> String {
    format!("band_{j:02}.model")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSettings {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub train: TrainConfig,
    /// Separate networks per band when false.
    pub joint: bool,
    /// Train only this band (others keep their initial weights).
    pub only_band: Option<usize>,
}

impl SystemSettings {
    pub fn new(objective: Objective) -> Self {
        Self {
            hidden_width: 512,
            hidden_layers: 3,
            train: TrainConfig::for_objective(objective),
            joint: false,
            only_band: None,
        }
    }
}

/// Fits the feature normalization on `train_set` and trains every band
/// network. Band `j` uses seed `derive_seed(settings.train.seed, j)` for
/// initialization and shuffling.
pub fn train_system(
    train_set: &EnvelopeDataset,
    validation_set: &EnvelopeDataset,
    layout: &BandLayout,
    stft: StftConfig,
    settings: &SystemSettings,
) -> Result<(EnhancementSystem, Vec<TrainReport>), PipelineError> {
    if train_set.num_bands != layout.num_bands() || validation_set.num_bands != layout.num_bands() {
        return Err(PipelineError::ConfigMismatch(format!(
            "datasets have {} / {} bands, layout {}",
            train_set.num_bands,
            validation_set.num_bands,
            layout.num_bands()
        )));
    }
    if train_set.context != validation_set.context {
        return Err(PipelineError::ConfigMismatch("context lengths differ".into()));
    }
    let norm = train_set.fit_feature_norm();
    let context = train_set.context;
    let input = train_set.feature_dim();
    let shape = |out| ModelShape {
        input_dim: input,
        hidden: vec![settings.hidden_width; settings.hidden_layers],
        output_dim: out,
    };
    let objective = settings.train.objective;
    let run = |target: BandTarget, index: u64, out: usize| -> Result<(MlpModel, TrainReport), PipelineError> {
        let mut config = settings.train.clone();
        config.seed = derive_seed(settings.train.seed, index);
        let model = MlpModel::init(&shape(out), config.seed);
        let tr = BandTrainingData {
            dataset: train_set,
            norm: &norm,
            target,
        };
        let va = BandTrainingData {
            dataset: validation_set,
            norm: &norm,
            target,
        };
        log::info!("training {target:?} ({objective})");
        Ok(train(model, &tr, &va, &config, context)?)
    };
    let (models, reports) = if settings.joint {
        let (m, r) = run(BandTarget::Joint, 0, input)?;
        (BandModels::Joint(m), vec![r])
    } else {
        let mut models = Vec::with_capacity(layout.num_bands());
        let mut reports = Vec::new();
        for j in 0..layout.num_bands() {
            if settings.only_band.is_some_and(|b| b != j) {
                models.push(MlpModel::init(&shape(context), derive_seed(settings.train.seed, j as u64)));
                continue;
            }
            let (m, r) = run(BandTarget::Band(j), j as u64, context)?;
            models.push(m);
            reports.push(r);
        }
        (BandModels::PerBand(models), reports)
    };
    let system = EnhancementSystem::new(models, layout.clone(), stft, norm, objective, context)?;
    Ok((system, reports))
}
