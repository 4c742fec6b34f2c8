//! Training, validation, and test material: per-utterance clean and noisy
//! envelope matrices, exposed as envelope-vector samples and as network
//! training rows.

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::noise::mix_at_snr;
use super::{derive_seed, MixError};
use crate::binfmt::{self, Decoder, Encoder};
use crate::features::{frame_features_into, log_envelopes, FeatureNorm, FeatureStats};
use crate::neural::TrainingData;
use crate::octave::{build_band_layout, envelopes, BandLayout, EnvelopeMatrix, EnvelopeVector, CONTEXT_FRAMES};
use crate::signal::TimeSignal;
use crate::stft::{Stft, StftConfig};

pub const PACK_MAGIC: &[u8; 5] = b"ASTDS";
pub const PACK_VERSION: u32 = 1;
pub const TRAIN_SNR_RANGE_DB: (f64, f64) = (-5.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        [Split::Train, Split::Validation, Split::Test].into_iter().find(|s| s.tag() == tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub snr_db: f64,
    pub noise_source: String,
    pub split: Split,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnrPlan {
    /// One mixture per utterance at an SNR drawn uniformly from `[lo, hi]`.
    Uniform(f64, f64),
    /// One mixture per utterance and listed SNR.
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPlan {
    pub split: Split,
    pub snr: SnrPlan,
    pub seed: u64,
    pub noise_source: String,
    pub stft: StftConfig,
    pub context: usize,
}

impl DatasetPlan {
    pub fn new(split: Split, snr: SnrPlan, seed: u64, noise_source: impl Into<String>) -> Self {
        Self {
            split,
            snr,
            seed,
            noise_source: noise_source.into(),
            stft: StftConfig::default(),
            context: CONTEXT_FRAMES,
        }
    }

    /// Uniform SNRs over the training range.
    pub fn training(split: Split, seed: u64, noise_source: impl Into<String>) -> Self {
        let (lo, hi) = TRAIN_SNR_RANGE_DB;
        Self::new(split, SnrPlan::Uniform(lo, hi), seed, noise_source)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceEnvelopes {
    pub clean: EnvelopeMatrix,
    pub noisy: EnvelopeMatrix,
    /// `log(1 + noisy)`, cached for feature rows.
    pub log_noisy: Array2<f64>,
    pub mix: MixSpec,
    /// Index of the source utterance.
    pub source: usize,
}

impl UtteranceEnvelopes {
    pub fn new(clean: EnvelopeMatrix, noisy: EnvelopeMatrix, mix: MixSpec, source: usize) -> Self {
        let log_noisy = log_envelopes(&noisy);
        Self {
            clean,
            noisy,
            log_noisy,
            mix,
            source,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.clean.num_frames()
    }
}

/// A single `(band, frame)` training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    /// Unnormalized `log(1 + Y)` features of all bands over the window.
    pub noisy_input: Vec<f64>,
    pub clean_envelope: EnvelopeVector,
    pub noisy_envelope: EnvelopeVector,
    pub band: usize,
    pub utterance: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeDataset {
    pub context: usize,
    pub num_bands: usize,
    pub utterances: Vec<UtteranceEnvelopes>,
    /// `(utterance, frame)` for every frame with a full context window.
    index: Vec<(usize, usize)>,
}

impl EnvelopeDataset {
    pub fn new(utterances: Vec<UtteranceEnvelopes>, num_bands: usize, context: usize) -> Result<Self, MixError> {
        let mut index = Vec::new();
        for (u, utt) in utterances.iter().enumerate() {
            if utt.clean.values.dim() != utt.noisy.values.dim() || utt.clean.num_bands() != num_bands {
                return Err(MixError::Shape(format!("utterance {u} envelope matrices disagree")));
            }
            index.extend((context.saturating_sub(1)..utt.num_frames()).map(|m| (u, m)));
        }
        Ok(Self {
            context,
            num_bands,
            utterances,
            index,
        })
    }

    /// Keeps every `stride`-th window of each utterance. Neighbouring windows
    /// share all but one frame, so this trades little information for time.
    pub fn subsample_windows(mut self, stride: usize) -> Self {
        let stride = stride.max(1);
        let first = self.context.saturating_sub(1);
        self.index.retain(|&(_, m)| (m - first) % stride == 0);
        self
    }

    /// Envelope-vector windows per band.
    pub fn windows_per_band(&self) -> usize {
        self.index.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.num_bands * self.context
    }

    pub fn window(&self, i: usize) -> (usize, usize) {
        self.index[i]
    }

    /// Samples in utterance, frame, band order.
    pub fn samples(&self) -> impl Iterator<Item = DatasetSample> + '_ {
        self.index.iter().flat_map(move |&(u, m)| {
            let utt = &self.utterances[u];
            let mut features = vec![0.0; self.feature_dim()];
            frame_features_into(&utt.log_noisy, m, self.context, &mut features);
            (0..self.num_bands).map(move |j| {
                let vector = |env: &EnvelopeMatrix| EnvelopeVector {
                    values: env.values.row(j).slice(ndarray::s![m + 1 - self.context..=m]).to_vec(),
                    band: j,
                    frame: m,
                };
                DatasetSample {
                    noisy_input: features.clone(),
                    clean_envelope: vector(&utt.clean),
                    noisy_envelope: vector(&utt.noisy),
                    band: j,
                    utterance: u,
                }
            })
        })
    }

    /// Feature statistics over every window, in index order.
    pub fn fit_feature_norm(&self) -> FeatureNorm {
        let mut buf = vec![0.0; self.feature_dim()];
        let mut stats = FeatureStats::new(self.feature_dim());
        for &(u, m) in &self.index {
            frame_features_into(&self.utterances[u].log_noisy, m, self.context, &mut buf);
            stats.push(&buf);
        }
        stats.finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut e = Encoder::new(PACK_MAGIC, PACK_VERSION);
        e.u32(self.context as u32);
        e.u32(self.num_bands as u32);
        e.u32(self.utterances.len() as u32);
        for utt in &self.utterances {
            let name = utt.mix.noise_source.as_bytes();
            e.u32(name.len() as u32);
            name.iter().for_each(|&b| e.u8(b));
            e.u8(utt.mix.split.tag());
            e.f64(utt.mix.snr_db);
            e.u64(utt.mix.seed);
            e.u64(utt.source as u64);
            e.u32(utt.num_frames() as u32);
            e.f64s(utt.clean.values.iter());
            e.f64s(utt.noisy.values.iter());
        }
        e.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, MixError> {
        let mut d = Decoder::new(bytes, PACK_MAGIC, PACK_VERSION)?;
        let context = d.u32("context")? as usize;
        let bands = d.u32("band count")? as usize;
        let count = d.u32("utterance count")? as usize;
        let mut utterances = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name_len = d.u32("noise name length")? as usize;
            let name: Vec<u8> = (0..name_len).map(|_| d.u8("noise name")).collect::<Result<_, _>>()?;
            let tag = d.u8("split")?;
            let split = Split::from_tag(tag).ok_or_else(|| MixError::Shape(format!("split tag {tag}")))?;
            let snr_db = d.f64("snr")?;
            let seed = d.u64("seed")?;
            let source = d.u64("source")? as usize;
            let frames = d.u32("frame count")? as usize;
            let mut matrix = |what| -> Result<EnvelopeMatrix, MixError> {
                let values = Array2::from_shape_vec((bands, frames), d.f64s(bands * frames, what)?)
                    .map_err(|e| MixError::Shape(e.to_string()))?;
                Ok(EnvelopeMatrix { values })
            };
            let clean = matrix("clean envelopes")?;
            let noisy = matrix("noisy envelopes")?;
            let mix = MixSpec {
                snr_db,
                noise_source: String::from_utf8_lossy(&name).into_owned(),
                split,
                seed,
            };
            utterances.push(UtteranceEnvelopes::new(clean, noisy, mix, source));
        }
        d.finish()?;
        Self::new(utterances, bands, context)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MixError> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| MixError::Io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MixError> {
        Self::decode(&binfmt::read_file(path.as_ref())?)
    }
}

/// Clean and noisy envelope matrices of an aligned signal pair.
pub fn envelope_pair(
    clean: &TimeSignal,
    noisy: &TimeSignal,
    stft: &Stft,
    layout: &BandLayout,
) -> Result<(EnvelopeMatrix, EnvelopeMatrix), MixError> {
    let c = envelopes(&stft.analyze(&clean.samples)?, layout)?;
    let n = envelopes(&stft.analyze(&noisy.samples)?, layout)?;
    Ok((c, n))
}

/// A mixture and the components it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedUtterance {
    pub clean: TimeSignal,
    pub noisy: TimeSignal,
    pub mix: MixSpec,
    pub source: usize,
}

/// Mixtures for every utterance under `plan`, in utterance then SNR order.
/// Each utterance draws from its own seed stream, so the result does not
/// depend on evaluation order.
pub fn mix_corpus(speech: &[TimeSignal], noise: &TimeSignal, plan: &DatasetPlan) -> Result<Vec<MixedUtterance>, MixError> {
    let mut out = Vec::new();
    for (u, clean) in speech.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, u as u64));
        let snrs = match &plan.snr {
            SnrPlan::Uniform(lo, hi) => vec![if lo == hi { *lo } else { rng.gen_range(*lo..=*hi) }],
            SnrPlan::List(list) => list.clone(),
        };
        for snr_db in snrs {
            let seed = rng.gen();
            let m = mix_at_snr(clean, noise, snr_db, seed)?;
            out.push(MixedUtterance {
                clean: clean.clone(),
                noisy: m.mixture,
                mix: MixSpec {
                    snr_db,
                    noise_source: plan.noise_source.clone(),
                    split: plan.split,
                    seed,
                },
                source: u,
            });
        }
    }
    Ok(out)
}

/// Envelope dataset of the given mixtures.
pub fn dataset_from_mixtures(mixtures: &[MixedUtterance], plan: &DatasetPlan) -> Result<EnvelopeDataset, MixError> {
    let stft = Stft::new(plan.stft)?;
    let rate = mixtures.first().map_or(crate::signal::WORKING_RATE_HZ, |m| m.clean.sample_rate_hz);
    let layout = build_band_layout(plan.stft.fft_size, rate)?;
    let mut utterances = Vec::with_capacity(mixtures.len());
    for m in mixtures {
        let (clean, noisy) = envelope_pair(&m.clean, &m.noisy, &stft, &layout)?;
        utterances.push(UtteranceEnvelopes::new(clean, noisy, m.mix.clone(), m.source));
    }
    EnvelopeDataset::new(utterances, layout.num_bands(), plan.context)
}

/// Mixes every utterance and extracts envelopes.
pub fn build_dataset(speech: &[TimeSignal], noise: &TimeSignal, plan: &DatasetPlan) -> Result<EnvelopeDataset, MixError> {
    dataset_from_mixtures(&mix_corpus(speech, noise, plan)?, plan)
}

/// Which outputs a network is trained to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandTarget {
    Band(usize),
    /// All bands at once, `bands * context` outputs, band major.
    Joint,
}

/// Normalized feature rows with the clean and noisy targets of a band.
pub struct BandTrainingData<'a> {
    pub dataset: &'a EnvelopeDataset,
    pub norm: &'a FeatureNorm,
    pub target: BandTarget,
}

impl TrainingData for BandTrainingData<'_> {
    fn len(&self) -> usize {
        self.dataset.windows_per_band()
    }

    fn input_dim(&self) -> usize {
        self.dataset.feature_dim()
    }

    fn output_dim(&self) -> usize {
        match self.target {
            BandTarget::Band(_) => self.dataset.context,
            BandTarget::Joint => self.dataset.feature_dim(),
        }
    }

    fn fill(&self, index: usize, input: &mut [f64], clean: &mut [f64], noisy: &mut [f64]) {
        let (u, m) = self.dataset.index[index];
        let utt = &self.dataset.utterances[u];
        let n = self.dataset.context;
        frame_features_into(&utt.log_noisy, m, n, input);
        self.norm.apply(input);
        let start = m + 1 - n;
        let bands = match self.target {
            BandTarget::Band(j) => j..j + 1,
            BandTarget::Joint => 0..self.dataset.num_bands,
        };
        for (slot, j) in bands.enumerate() {
            for i in 0..n {
                clean[slot * n + i] = utt.clean.values[[j, start + i]];
                noisy[slot * n + i] = utt.noisy.values[[j, start + i]];
            }
        }
    }
}
