use std::fs;
use std::path::{Path, PathBuf};

use astoi::config::TrainSettings;
use astoi::mixing::{
    build_dataset, derive_seed, load_manifest, pseudo_speech_corpus, split_noise, synth_babble, synth_ssn,
    write_manifest, EnvelopeDataset, SpeechParams, Split,
};
use astoi::neural::{Objective, TrainReport};
use astoi::octave::build_band_layout;
use astoi::pipeline::{
    evaluate_system, gain_correlation, report_tables, train_classical, train_system, BandModels, ClassicalSettings,
    ClassicalSystem, EnhancementSystem, SpectralDataset, SystemSettings, TableFormat, BASELINE_CONTEXT_IN,
    BASELINE_CONTEXT_OUT,
};
use astoi::signal::{read_wav, to_working_rate, write_wav, TimeSignal, WORKING_RATE_HZ};
use astoi::stft::StftConfig;

use crate::data::{
    pack_path, read_split_dir, regenerate_mixtures, resolve_testset, test_items, test_mixtures, write_split,
    SynthMeta,
};
use crate::error::{io_error, CliError};

/// Noise given to `synth-data`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    Ssn,
    Babble,
    File(PathBuf),
}

impl std::str::FromStr for NoiseSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ssn" => Ok(NoiseSource::Ssn),
            "babble" => Ok(NoiseSource::Babble),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(NoiseSource::File(PathBuf::from(p))),
                _ => Err(format!("expected ssn, babble or file:PATH, got {s:?}")),
            },
        }
    }
}

/// `--band` selection for `train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSelection {
    One(usize),
    All,
    Joint,
}

impl std::str::FromStr for BandSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(BandSelection::All),
            "joint" => Ok(BandSelection::Joint),
            _ => s
                .parse::<usize>()
                .ok()
                .filter(|&j| j < astoi::NUM_BANDS)
                .map(BandSelection::One)
                .ok_or_else(|| format!("expected 0..{}, all or joint, got {s:?}", astoi::NUM_BANDS - 1)),
        }
    }
}

pub fn parse_snr_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in {s:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in {s:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("invalid SNR range {s:?}"));
    }
    Ok((lo, hi))
}

pub fn parse_snr_list(s: &str) -> Result<Vec<f64>, String> {
    let list: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| format!("expected comma-separated SNRs, got {s:?}"))?;
    if list.is_empty() {
        return Err("empty SNR list".into());
    }
    Ok(list)
}

pub struct SynthArgs {
    pub manifest: PathBuf,
    pub noise: NoiseSource,
    pub snr_range: (f64, f64),
    pub seed: u64,
    pub out: PathBuf,
    pub noise_seconds: f64,
    pub babble_speakers: usize,
}

/// Splits utterances 80/10/10 in manifest order, at least one per split.
fn split_counts(n: usize) -> Result<[usize; 3], CliError> {
    if n < 3 {
        return Err(CliError::Data(format!("need at least 3 utterances, manifest lists {n}")));
    }
    let held = (n / 10).max(1);
    Ok([n - 2 * held, held, held])
}

pub fn synth_data(args: &SynthArgs) -> Result<(), CliError> {
    let speech = load_manifest(&args.manifest)?;
    let [n_train, n_val, _] = split_counts(speech.len())?;
    let groups = [
        &speech[..n_train],
        &speech[n_train..n_train + n_val],
        &speech[n_train + n_val..],
    ];
    let noise_seed = derive_seed(args.seed, 3);
    let (name, noise) = match &args.noise {
        NoiseSource::Ssn => ("ssn".to_string(), synth_ssn(groups[0], args.noise_seconds, noise_seed)?),
        NoiseSource::Babble => (
            "babble".to_string(),
            synth_babble(groups[0], args.babble_speakers, args.noise_seconds, noise_seed)?,
        ),
        NoiseSource::File(p) => {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            (name, to_working_rate(&read_wav(p)?)?)
        }
    };
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(CliError::Usage(format!("unusable noise name {name:?}")));
    }
    let total = noise.duration_s();
    let parts = split_noise(&noise, 0.6 * total, 0.2 * total, 0.2 * total)?;
    let meta = SynthMeta {
        seed: args.seed,
        snr_lo: args.snr_range.0,
        snr_hi: args.snr_range.1,
        noise: name.clone(),
    };
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    for ((split, group), part) in crate::data::SPLITS.into_iter().zip(groups).zip(&parts) {
        let (stored, stored_noise) = write_split(&args.out, split, group, &name, part)?;
        if split != Split::Test {
            let data = build_dataset(&stored, &stored_noise, &meta.plan(split))?;
            data.save(pack_path(&args.out, split))?;
            log::info!(
                "{}: {} utterances, {} windows per band",
                split.name(),
                stored.len(),
                data.windows_per_band()
            );
        }
    }
    meta.write(&args.out)?;
    println!(
        "wrote {} train / {} validation / {} test utterances with {name} noise to {}",
        groups[0].len(),
        groups[1].len(),
        groups[2].len(),
        args.out.display()
    );
    Ok(())
}

fn read_config(path: Option<&Path>, settings: &mut TrainSettings) -> Result<(), CliError> {
    if let Some(p) = path {
        let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
        settings.apply(&text)?;
    }
    Ok(())
}

fn print_reports(label: &str, reports: &[TrainReport]) {
    for (i, r) in reports.iter().enumerate() {
        let best = r.best_epoch.map(|e| r.epochs[e].validation_cost);
        println!(
            "{label} {i}: {} epochs, stop {:?}, best validation cost {}",
            r.epochs.len(),
            r.stop_reason,
            best.map_or("-".to_string(), |c| format!("{c:.6}"))
        );
    }
}

pub fn train(
    data: &Path,
    objective: Objective,
    band: BandSelection,
    config: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    if objective == Objective::SpectralMse {
        return Err(CliError::Usage("use train-baseline for the spectral MSE system".into()));
    }
    let train_set = EnvelopeDataset::load(pack_path(data, Split::Train))?;
    let validation_set = EnvelopeDataset::load(pack_path(data, Split::Validation))?;
    let base = SystemSettings::new(objective);
    let mut file_settings = TrainSettings {
        hidden_width: base.hidden_width,
        hidden_layers: base.hidden_layers,
        train: base.train.clone(),
    };
    read_config(config, &mut file_settings)?;
    let settings = SystemSettings {
        hidden_width: file_settings.hidden_width,
        hidden_layers: file_settings.hidden_layers,
        train: file_settings.train,
        joint: band == BandSelection::Joint,
        only_band: match band {
            BandSelection::One(j) => Some(j),
            _ => None,
        },
    };
    let layout = build_band_layout(StftConfig::default().fft_size, WORKING_RATE_HZ).map_err(astoi::PipelineError::from)?;
    let (mut system, reports) = train_system(&train_set, &validation_set, &layout, StftConfig::default(), &settings)?;
    if let BandSelection::One(j) = band {
        // fill in the other bands from an earlier run into the same directory
        if out.join("system.bin").exists() {
            let mut existing = EnhancementSystem::load(out)?;
            if existing.objective != system.objective || existing.feature_norm != system.feature_norm {
                return Err(CliError::Data(format!(
                    "{} holds a system trained with a different objective or dataset",
                    out.display()
                )));
            }
            match (&mut existing.models, system.models) {
                (BandModels::PerBand(old), BandModels::PerBand(mut new)) => old[j] = new.swap_remove(j),
                _ => return Err(CliError::Data(format!("{} holds a joint system", out.display()))),
            }
            system = existing;
        }
    }
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    system.save(out)?;
    print_reports(if settings.joint { "joint" } else { "band" }, &reports);
    println!("saved {} system to {}", objective, out.display());
    Ok(())
}

pub fn train_baseline(data: &Path, hidden: usize, config: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let stft = StftConfig::default();
    let build = |split| -> Result<SpectralDataset, CliError> {
        let mixtures = regenerate_mixtures(data, split)?;
        Ok(SpectralDataset::from_mixtures(&mixtures, stft, BASELINE_CONTEXT_IN, BASELINE_CONTEXT_OUT)?)
    };
    let (train_set, validation_set) = (build(Split::Train)?, build(Split::Validation)?);
    let base = ClassicalSettings::new(hidden);
    let mut file_settings = TrainSettings {
        hidden_width: base.hidden_width,
        hidden_layers: base.hidden_layers,
        train: base.train,
    };
    read_config(config, &mut file_settings)?;
    let settings = ClassicalSettings {
        hidden_width: file_settings.hidden_width,
        hidden_layers: file_settings.hidden_layers,
        train: file_settings.train,
    };
    let (system, report) = train_classical(&train_set, &validation_set, stft, &settings)?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    system.save(out)?;
    print_reports("baseline", std::slice::from_ref(&report));
    println!("saved baseline ({} hidden units) to {}", settings.hidden_width, out.display());
    Ok(())
}

/// Either kind of trained system found in a model directory.
pub enum Model {
    Neural(EnhancementSystem),
    Classical(ClassicalSystem),
}

impl Model {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        if dir.join("system.bin").is_file() {
            Ok(Model::Neural(EnhancementSystem::load(dir)?))
        } else if dir.join("baseline.bin").is_file() {
            Ok(Model::Classical(ClassicalSystem::load(dir)?))
        } else {
            Err(CliError::Data(format!("{} holds no trained system", dir.display())))
        }
    }

    pub fn enhance(&self, noisy: &TimeSignal) -> Result<TimeSignal, CliError> {
        Ok(match self {
            Model::Neural(s) => s.enhance(noisy)?,
            Model::Classical(s) => s.enhance(noisy)?,
        })
    }
}

fn model_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

pub fn enhance(model: &Path, input: &Path, out: &Path) -> Result<(), CliError> {
    let model = Model::load(model)?;
    let noisy = to_working_rate(&read_wav(input)?)?;
    let enhanced = model.enhance(&noisy)?;
    write_wav(&enhanced, out)?;
    println!("wrote {} ({:.2} s at {} Hz)", out.display(), enhanced.duration_s(), enhanced.sample_rate_hz);
    Ok(())
}

pub fn evaluate(models: &[PathBuf], testset: &Path, snrs: &[f64], format: TableFormat, seed: u64) -> Result<(), CliError> {
    let audio = read_split_dir(&resolve_testset(testset))?;
    let items = test_items(test_mixtures(&audio, snrs, seed)?);
    let mut rows = Vec::new();
    for dir in models {
        let model = Model::load(dir)?;
        let name = model_name(dir);
        let mut failure = None;
        let result = evaluate_system(&name, &items, |x| {
            model.enhance(x).map_err(|e| {
                let message = e.to_string();
                failure = Some(e);
                astoi::PipelineError::Invalid(message)
            })
        });
        match (result, failure) {
            (Ok(r), _) => rows.extend(r),
            (Err(_), Some(e)) => return Err(e),
            (Err(e), None) => return Err(e.into()),
        }
    }
    print!("{}", report_tables(&rows, format));
    Ok(())
}

pub fn gain_corr(a: &Path, b: &Path, testset: &Path, snrs: &[f64], seed: u64) -> Result<(), CliError> {
    let load = |dir: &Path| match Model::load(dir)? {
        Model::Neural(s) => Ok(s),
        Model::Classical(_) => Err(CliError::Usage(format!(
            "{} is a baseline; gain correlation needs band-gain systems",
            dir.display()
        ))),
    };
    let (sa, sb) = (load(a)?, load(b)?);
    let audio = read_split_dir(&resolve_testset(testset))?;
    let inputs: Vec<(String, TimeSignal)> = test_mixtures(&audio, snrs, seed)?
        .into_iter()
        .map(|m| (m.mix.noise_source, m.noisy))
        .collect();
    println!("{:<12}{:>12}", "noise", "correlation");
    for (noise, r) in gain_correlation(&sa, &sb, &inputs)? {
        println!("{noise:<12}{r:>12.2}");
    }
    Ok(())
}

pub fn gen_speech(seconds: f64, seed: u64, out: &Path) -> Result<(), CliError> {
    let corpus = pseudo_speech_corpus(seconds, &SpeechParams::default(), seed)?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let mut names = Vec::with_capacity(corpus.len());
    for (i, utt) in corpus.iter().enumerate() {
        let name = PathBuf::from(format!("utt_{i:04}.wav"));
        write_wav(utt, out.join(&name))?;
        names.push(name);
    }
    write_manifest(out.join("manifest.txt"), &names)?;
    println!("wrote {} utterances and manifest.txt to {}", corpus.len(), out.display());
    Ok(())
}

pub fn verify(pairs: usize, seed: u64) -> Result<(), CliError> {
    let checks = astoi::verify::run_all(pairs, seed);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_sources() {
        assert_eq!("ssn".parse(), Ok(NoiseSource::Ssn));
        assert_eq!("babble".parse(), Ok(NoiseSource::Babble));
        assert_eq!("file:a/b.wav".parse(), Ok(NoiseSource::File("a/b.wav".into())));
        assert!("file:".parse::<NoiseSource>().is_err());
        assert!("pink".parse::<NoiseSource>().is_err());
    }

    #[test]
    fn band_selection() {
        assert_eq!("7".parse(), Ok(BandSelection::One(7)));
        assert_eq!("all".parse(), Ok(BandSelection::All));
        assert_eq!("joint".parse(), Ok(BandSelection::Joint));
        assert!("15".parse::<BandSelection>().is_err());
    }

    #[test]
    fn snr_arguments() {
        assert_eq!(parse_snr_range("-5:10"), Ok((-5.0, 10.0)));
        assert!(parse_snr_range("10:-5").is_err());
        assert!(parse_snr_range("5").is_err());
        assert_eq!(parse_snr_list("-5,0, 5"), Ok(vec![-5.0, 0.0, 5.0]));
        assert!(parse_snr_list("-5,,5").is_err());
    }

    #[test]
    fn split_counts_keep_every_split_populated() {
        assert_eq!(split_counts(3).unwrap(), [1, 1, 1]);
        assert_eq!(split_counts(25).unwrap(), [21, 2, 2]);
        assert!(split_counts(2).is_err());
    }
}
