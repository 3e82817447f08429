//! Rayon-backed `par::map` against the sequential path on the per-sample
//! forward passes that dominate training and evaluation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drf_core::model::{DrfModel, FusionOptions, ModelConfig, Weighting};
use drf_core::par;
use drf_core::synthdata::{generate, GeneratorConfig};

fn forward_passes(c: &mut Criterion) {
    let data = generate(&GeneratorConfig {
        n_train: 512,
        n_val: 1,
        n_test: 1,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let model = DrfModel::init(&ModelConfig::default(), 0).unwrap();
    let run = |s: &drf_core::synthdata::Sample| {
        model
            .forward(s, Weighting::Uniform, FusionOptions::default())
            .unwrap()
            .predicted()
    };

    let mut group = c.benchmark_group("forward");
    for n in [64usize, 512] {
        let batch = &data.train[..n];
        group.bench_with_input(BenchmarkId::new("par_map", n), batch, |b, batch| b.iter(|| par::map(batch, run)));
        group.bench_with_input(BenchmarkId::new("sequential", n), batch, |b, batch| {
            b.iter(|| par::map_sequential(batch, run))
        });
    }
    group.finish();
}

criterion_group!(benches, forward_passes);
criterion_main!(benches);
