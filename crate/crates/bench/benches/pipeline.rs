//! End-to-end benchmark: one full training epoch per algorithm family on a
//! synthetic-blob workload, measuring the relative cost of the single-pass
//! baseline, the double-forward dropout-instance trainers, and the
//! two-network reference trainers.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dropsel_core::data::{build_transition_matrix, synthetic_blobs, NoiseKind};
use dropsel_core::net::presets;
use dropsel_core::trainers::{Algorithm, Trainer, TrainerConfig};

fn epoch_bench(c: &mut Criterion, algorithm: Algorithm) {
    let base = presets::blob_mlp(20, 5, &[32]).unwrap();
    let matrix = build_transition_matrix(NoiseKind::Symmetric, 0.4, 5).unwrap();
    let train = synthetic_blobs(5, 100, 20, 2.5, 7, false)
        .unwrap()
        .with_noise(&matrix, 11)
        .unwrap();
    let test = synthetic_blobs(5, 40, 20, 2.5, 7, true).unwrap();

    let mut cfg = TrainerConfig::new(algorithm, 3);
    cfg.batch_size = 64;
    cfg.max_epochs = 1_000_000;
    cfg.warmup_epochs = 0;
    cfg.tau = 0.4;
    cfg.ramp_epochs = 10;
    cfg.dropout_p = 0.5;

    let trainer = Trainer::new(&base, cfg).unwrap();
    c.bench_function(&format!("epoch_{algorithm}"), |b| {
        b.iter_batched(
            || trainer.clone(),
            |mut t| {
                t.run_epoch(black_box(&train), &test).unwrap();
                t
            },
            BatchSize::LargeInput,
        )
    });
}

fn bench_epochs(c: &mut Criterion) {
    for algorithm in [
        Algorithm::BaselineCe,
        Algorithm::MentornetOurs,
        Algorithm::CoteachingPlusOurs,
        Algorithm::JocorOurs,
        Algorithm::Coteaching,
        Algorithm::Jocor,
    ] {
        epoch_bench(c, algorithm);
    }
}

criterion_group!(pipeline, bench_epochs);
criterion_main!(pipeline);
