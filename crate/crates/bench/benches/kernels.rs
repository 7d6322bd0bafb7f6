use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use omivae_core::layers::Mode;
use omivae_core::loss::LossWeights;
use omivae_core::model::ModelInput;
use omivae_core::numerics::sym_eig;
use omivae_core::{ModelConfig, OmiVaeModel, RngState};

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    let mut rng = RngState::new(1);
    for n in [64, 256] {
        let a = rng.gaussian(32, n);
        let b = rng.gaussian(n, n);
        group.bench_with_input(BenchmarkId::new("batch32", n), &n, |bench, _| {
            bench.iter(|| black_box(a.matmul(&b).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("at", n), &n, |bench, _| {
            bench.iter(|| black_box(a.matmul_at(&a).unwrap()))
        });
    }
    group.finish();
}

fn forward_backward(c: &mut Criterion) {
    let blocks = vec![100; 4];
    let config = ModelConfig::small(blocks.clone(), 200, 5);
    let mut rng = RngState::new(2);
    let mut model = OmiVaeModel::build(config, &mut rng).unwrap();
    let input = ModelInput {
        expr: Some(rng.gaussian(32, 200)),
        methyl: blocks.iter().map(|&d| rng.gaussian(32, d)).collect(),
    };
    let labels: Vec<usize> = (0..32).map(|i| i % 5).collect();
    let weights = LossWeights::new(1.0, 1.0).unwrap();
    c.bench_function("forward_backward/small_batch32", |bench| {
        bench.iter(|| black_box(model.forward_backward(&input, Some(&labels), weights, &mut rng).unwrap()))
    });
    c.bench_function("infer/small_batch32", |bench| bench.iter(|| black_box(model.infer(&input).unwrap())));
    c.bench_function("encode_train/small_batch32", |bench| {
        bench.iter(|| black_box(model.encode(&input, Mode::Train).unwrap()))
    });
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    let mut rng = RngState::new(3);
    for n in [16, 64] {
        let x = rng.gaussian(2 * n, n);
        let s = x.matmul_at(&x).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| black_box(sym_eig(&s).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, forward_backward, eigen);
criterion_main!(benches);
