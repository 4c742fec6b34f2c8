use std::path::PathBuf;
use std::process::ExitCode;

use astoi::neural::Objective;
use astoi::pipeline::TableFormat;
use clap::{Parser, Subcommand};

mod commands;
mod data;
mod error;

use commands::{parse_snr_list, parse_snr_range, BandSelection, NoiseSource, SynthArgs};
use error::CliError;

/// Speech enhancement by envelope-correlation band gains.
#[derive(Parser, Debug)]
#[command(name = "astoi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mix a speech corpus with noise into train/validation/test data.
    SynthData {
        #[arg(long)]
        manifest: PathBuf,
        /// ssn, babble, or file:PATH
        #[arg(long)]
        noise: NoiseSource,
        #[arg(long, default_value = "-5:10", value_parser = parse_snr_range, allow_hyphen_values = true)]
        snr_range: (f64, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Length of synthesized noise before the 60/20/20 split.
        #[arg(long, default_value_t = 100.0)]
        noise_seconds: f64,
        #[arg(long, default_value_t = astoi::mixing::DEFAULT_BABBLE_SPEAKERS)]
        babble_speakers: usize,
    },
    /// Train band-gain networks.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        objective: Objective,
        /// 0..14, all, or joint
        #[arg(long, default_value = "all")]
        band: BandSelection,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the STFT-magnitude MSE baseline.
    TrainBaseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 512)]
        hidden: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enhance one WAV file.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score systems on a test set; repeat --model to compare several.
    Evaluate {
        #[arg(long, required = true)]
        model: Vec<PathBuf>,
        #[arg(long)]
        testset: PathBuf,
        #[arg(long, default_value = "-5,0,5", value_parser = parse_snr_list, allow_hyphen_values = true)]
        snrs: ::std::vec::Vec<f64>,
        #[arg(long, default_value = "text")]
        format: TableFormat,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Correlation between the gains of two systems, per noise type.
    GainCorr {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long)]
        testset: PathBuf,
        #[arg(long, default_value = "-5,0,5", value_parser = parse_snr_list, allow_hyphen_values = true)]
        snrs: ::std::vec::Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded pseudo-speech corpus and its manifest.
    GenSpeech {
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the cost gradient against finite differences.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::SynthData {
            manifest,
            noise,
            snr_range,
            seed,
            out,
            noise_seconds,
            babble_speakers,
        } => commands::synth_data(&SynthArgs {
            manifest,
            noise,
            snr_range,
            seed,
            out,
            noise_seconds,
            babble_speakers,
        }),
        Command::Train {
            data,
            objective,
            band,
            config,
            out,
        } => commands::train(&data, objective, band, config.as_deref(), &out),
        Command::TrainBaseline {
            data,
            hidden,
            config,
            out,
        } => commands::train_baseline(&data, hidden, config.as_deref(), &out),
        Command::Enhance { model, input, out } => commands::enhance(&model, &input, &out),
        Command::Evaluate {
            model,
            testset,
            snrs,
            format,
            seed,
        } => commands::evaluate(&model, &testset, &snrs, format, seed),
        Command::GainCorr {
            model_a,
            model_b,
            testset,
            snrs,
            seed,
        } => commands::gain_corr(&model_a, &model_b, &testset, &snrs, seed),
        Command::GenSpeech { seconds, seed, out } => commands::gen_speech(seconds, seed, &out),
        Command::Verify { pairs, seed } => commands::verify(pairs, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
