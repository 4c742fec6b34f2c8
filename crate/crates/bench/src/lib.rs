//! Benchmarks of the hot kernels: STFT, envelopes, the correlation cost and
//! its gradient, a training step, and active speech level measurement.

use astoi::cost::{elc_grad, elc_with_grad, emse_grad};
use astoi::mixing::{active_speech_level, pseudo_speech, SpeechParams};
use astoi::neural::{loss_gradients, LossSpec, MlpModel, ModelShape, Objective};
use astoi::octave::{build_band_layout, envelopes};
use astoi::stft::{Stft, StftConfig};
use criterion::{black_box, BenchmarkId, Criterion, Throughput};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn positive(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.01..2.0)).collect()
}

pub fn stft(c: &mut Criterion) {
    let stft = Stft::new(StftConfig::default()).unwrap();
    let layout = build_band_layout(256, 10_000).unwrap();
    let samples = noise(50_000, 1);
    let spec = stft.analyze(&samples).unwrap();
    let mut g = c.benchmark_group("stft_5s");
    g.throughput(Throughput::Elements(samples.len() as u64));
    g.bench_function("analyze", |b| b.iter(|| stft.analyze(black_box(&samples)).unwrap()));
    g.bench_function("synthesize", |b| b.iter(|| stft.synthesize(black_box(&spec)).unwrap()));
    g.bench_function("envelopes", |b| b.iter(|| envelopes(black_box(&spec), &layout).unwrap()));
    g.finish();
}

pub fn cost(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = positive(30, &mut rng);
    let y = positive(30, &mut rng);
    let mut g = c.benchmark_group("cost_n30");
    g.bench_function("elc_with_grad", |b| b.iter(|| elc_with_grad(black_box(&x), black_box(&y)).unwrap()));
    g.bench_function("elc_grad", |b| b.iter(|| elc_grad(black_box(&x), black_box(&y)).unwrap()));
    g.bench_function("emse_grad", |b| b.iter(|| emse_grad(black_box(&x), black_box(&y)).unwrap()));
    g.finish();
}

pub fn training_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("minibatch_256");
    g.sample_size(20);
    for width in [64, 512] {
        let model = MlpModel::init(&ModelShape::three_hidden(450, width, 30), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inputs = Array2::from_shape_simple_fn((256, 450), || rng.gen_range(-2.0..2.0));
        let clean = Array2::from_shape_simple_fn((256, 30), || rng.gen_range(0.01..2.0));
        let noisy = Array2::from_shape_simple_fn((256, 30), || rng.gen_range(0.5..3.0));
        for objective in [Objective::Elc, Objective::Emse] {
            g.bench_with_input(BenchmarkId::new(objective.name(), width), &width, |b, _| {
                b.iter(|| {
                    loss_gradients(&model, &inputs, &clean, &noisy, LossSpec::new(objective, 30), None).unwrap()
                })
            });
        }
    }
    g.finish();
}

pub fn speech_level(c: &mut Criterion) {
    let speech = pseudo_speech(&SpeechParams::default(), 5).unwrap();
    let mut g = c.benchmark_group("speech_level");
    g.throughput(Throughput::Elements(speech.len() as u64));
    g.bench_function("active_speech_level", |b| b.iter(|| active_speech_level(black_box(&speech)).unwrap()));
    g.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    stft(c);
    cost(c);
    training_step(c);
    speech_level(c);
}
