//! On-disk layout written by `synth-data`:
//!
//! ```text
//! DIR/synth.txt                 seed, SNR range and noise name
//! DIR/train.pack                envelope dataset (training split)
//! DIR/validation.pack           envelope dataset (validation split)
//! DIR/<split>/speech/NNNN.wav   clean utterances
//! DIR/<split>/noise/<name>.wav  the split's noise segment
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use astoi::mixing::{derive_seed, mix_corpus, DatasetPlan, MixedUtterance, SnrPlan, Split};
use astoi::pipeline::TestItem;
use astoi::signal::{read_wav, to_working_rate, write_wav, TimeSignal};

use crate::error::{io_error, CliError};

pub const META_FILE: &str = "synth.txt";
pub const SPLITS: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMeta {
    pub seed: u64,
    pub snr_lo: f64,
    pub snr_hi: f64,
    pub noise: String,
}

impl SynthMeta {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = format!(
            "seed = {}\nsnr_lo = {}\nsnr_hi = {}\nnoise = {}\n",
            self.seed, self.snr_lo, self.snr_hi, self.noise
        );
        let path = dir.join(META_FILE);
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let bad = |what: &str| CliError::Data(format!("{}: bad or missing {what}", path.display()));
        let value = |key: &str| {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
                .ok_or_else(|| bad(key))
        };
        Ok(Self {
            seed: value("seed")?.parse().map_err(|_| bad("seed"))?,
            snr_lo: value("snr_lo")?.parse().map_err(|_| bad("snr_lo"))?,
            snr_hi: value("snr_hi")?.parse().map_err(|_| bad("snr_hi"))?,
            noise: value("noise")?,
        })
    }

    /// Mixing plan of a training or validation split.
    pub fn plan(&self, split: Split) -> DatasetPlan {
        let index = SPLITS.iter().position(|s| *s == split).unwrap() as u64;
        DatasetPlan::new(
            split,
            SnrPlan::Uniform(self.snr_lo, self.snr_hi),
            derive_seed(self.seed, index),
            self.noise.clone(),
        )
    }
}

pub fn split_dir(dir: &Path, split: Split) -> PathBuf {
    dir.join(split.name())
}

pub fn pack_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.pack", split.name()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

/// Writes a split's files and returns what a later reader will see, so
/// datasets are built from the 16-bit quantized audio.
pub fn write_split(
    dir: &Path,
    split: Split,
    speech: &[TimeSignal],
    noise_name: &str,
    noise: &TimeSignal,
) -> Result<(Vec<TimeSignal>, TimeSignal), CliError> {
    let base = split_dir(dir, split);
    create_dir(&base.join("speech"))?;
    create_dir(&base.join("noise"))?;
    let mut stored = Vec::with_capacity(speech.len());
    for (i, s) in speech.iter().enumerate() {
        let path = base.join("speech").join(format!("{i:04}.wav"));
        write_wav(&fit_to_range(s), &path)?;
        stored.push(read_wav(&path)?);
    }
    let path = base.join("noise").join(format!("{noise_name}.wav"));
    write_wav(&fit_to_range(noise), &path)?;
    Ok((stored, read_wav(&path)?))
}

/// Scales a signal down to a 0.9 peak if it would otherwise clip. Mixing
/// sets levels relative to the speech, so the absolute level is free.
fn fit_to_range(signal: &TimeSignal) -> TimeSignal {
    let peak = signal.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak > 0.9 {
        signal.scaled(0.9 / peak)
    } else {
        signal.clone()
    }
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no WAV files in {}", dir.display())));
    }
    Ok(files)
}

fn read_working(path: &Path) -> Result<TimeSignal, CliError> {
    Ok(to_working_rate(&read_wav(path)?)?)
}

/// Clean utterances and named noises of a split directory.
pub struct SplitAudio {
    pub speech: Vec<TimeSignal>,
    pub noises: Vec<(String, TimeSignal)>,
}

pub fn read_split_dir(base: &Path) -> Result<SplitAudio, CliError> {
    let speech = wav_files(&base.join("speech"))?
        .iter()
        .map(|p| read_working(p))
        .collect::<Result<_, _>>()?;
    let noises = wav_files(&base.join("noise"))?
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, read_working(p)?))
        })
        .collect::<Result<_, CliError>>()?;
    Ok(SplitAudio { speech, noises })
}

/// Accepts either a `synth-data` output directory or its `test` split.
pub fn resolve_testset(dir: &Path) -> PathBuf {
    let nested = split_dir(dir, Split::Test);
    if nested.join("speech").is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// Every utterance mixed with every noise at every SNR. Noise `k` uses seed
/// stream `derive_seed(seed, k)`.
pub fn test_mixtures(audio: &SplitAudio, snrs: &[f64], seed: u64) -> Result<Vec<MixedUtterance>, CliError> {
    let mut out = Vec::new();
    for (k, (name, noise)) in audio.noises.iter().enumerate() {
        let plan = DatasetPlan::new(
            Split::Test,
            SnrPlan::List(snrs.to_vec()),
            derive_seed(seed, k as u64),
            name.clone(),
        );
        out.extend(mix_corpus(&audio.speech, noise, &plan)?);
    }
    Ok(out)
}

pub fn test_items(mixtures: Vec<MixedUtterance>) -> Vec<TestItem> {
    mixtures
        .into_iter()
        .map(|m| TestItem {
            noise_type: m.mix.noise_source,
            snr_db: m.mix.snr_db,
            clean: m.clean,
            noisy: m.noisy,
        })
        .collect()
}

/// Training and validation mixtures regenerated from a `synth-data`
/// directory with its recorded plan.
pub fn regenerate_mixtures(dir: &Path, split: Split) -> Result<Vec<MixedUtterance>, CliError> {
    let meta = SynthMeta::read(dir)?;
    let audio = read_split_dir(&split_dir(dir, split))?;
    let (_, noise) = audio
        .noises
        .iter()
        .find(|(n, _)| *n == meta.noise)
        .ok_or_else(|| CliError::Data(format!("{} split has no {} noise file", split.name(), meta.noise)))?;
    Ok(mix_corpus(&audio.speech, noise, &meta.plan(split))?)
}
