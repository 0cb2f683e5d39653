//! Microbenchmarks for the numeric kernels on hot paths: forward and
//! backward passes at training batch sizes, mask sampling, small-loss
//! selection, and noise injection.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dropsel_core::data::{build_transition_matrix, inject_noise, NoiseKind};
use dropsel_core::ensemble::{make_dropoutnet, sample_mask_set};
use dropsel_core::net::{
    backward, cross_entropy_per_sample, forward, init_parameters, log_softmax_rows, presets, Mode,
};
use dropsel_core::rng::SplitMix64;
use dropsel_core::selection::select_small_loss;
use dropsel_core::Tensor;

fn random_batch(rows: usize, shape: &[usize], seed: u64) -> Tensor {
    let mut stream = SplitMix64::new(seed);
    let len: usize = rows * shape.iter().product::<usize>();
    let data: Vec<f64> = (0..len).map(|_| stream.next_f64()).collect();
    let mut full = vec![rows];
    full.extend_from_slice(shape);
    Tensor::new(full, data).unwrap()
}

fn bench_mlp_passes(c: &mut Criterion) {
    let base = presets::mnist_mlp();
    let (spec, _) = make_dropoutnet(&base, 0.7).unwrap();
    let params = init_parameters(&spec, 11);
    let batch = random_batch(128, spec.input_shape(), 42);
    let labels: Vec<usize> = (0..128).map(|i| i % 10).collect();
    let masks = sample_mask_set(&spec, 7).unwrap();
    let all: Vec<usize> = (0..128).collect();

    c.bench_function("mlp_forward_b128", |b| {
        b.iter(|| forward(&spec, &params, black_box(&batch), Some(&masks), Mode::Train).unwrap())
    });

    let trace = forward(&spec, &params, &batch, Some(&masks), Mode::Train).unwrap();
    c.bench_function("mlp_backward_b128", |b| {
        b.iter(|| backward(&spec, &params, black_box(&trace), &labels, Some(&masks), &all).unwrap())
    });
}

fn bench_cnn_forward(c: &mut Criterion) {
    let spec = presets::cnn_small(10).unwrap();
    let params = init_parameters(&spec, 11);
    let batch = random_batch(16, spec.input_shape(), 42);
    c.bench_function("cnn_small_forward_b16", |b| {
        b.iter(|| forward(&spec, &params, black_box(&batch), None, Mode::Eval).unwrap())
    });
}

fn bench_mask_sampling(c: &mut Criterion) {
    let base = presets::mnist_mlp();
    let (spec, _) = make_dropoutnet(&base, 0.7).unwrap();
    let mut seed = 0u64;
    c.bench_function("mask_set_sample", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            sample_mask_set(&spec, black_box(seed)).unwrap()
        })
    });
}

fn bench_selection(c: &mut Criterion) {
    let mut stream = SplitMix64::new(3);
    let losses: Vec<f64> = (0..128).map(|_| stream.next_f64() * 5.0).collect();
    c.bench_function("small_loss_select_b128", |b| {
        b.iter_batched(
            || losses.clone(),
            |l| select_small_loss(black_box(&l), 0.7).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_loss(c: &mut Criterion) {
    let logits = random_batch(128, &[10], 9);
    let labels: Vec<usize> = (0..128).map(|i| i % 10).collect();
    c.bench_function("cross_entropy_b128", |b| {
        b.iter(|| {
            let lp = log_softmax_rows(black_box(&logits)).unwrap();
            cross_entropy_per_sample(&lp, &labels).unwrap()
        })
    });
}

fn bench_noise_injection(c: &mut Criterion) {
    let matrix = build_transition_matrix(NoiseKind::Symmetric, 0.5, 10).unwrap();
    let labels: Vec<usize> = (0..60_000).map(|i| i % 10).collect();
    c.bench_function("inject_noise_60k", |b| {
        b.iter(|| inject_noise(black_box(&labels), &matrix, 5).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_mlp_passes,
    bench_cnn_forward,
    bench_mask_sampling,
    bench_selection,
    bench_loss,
    bench_noise_injection
);
criterion_main!(kernels);
