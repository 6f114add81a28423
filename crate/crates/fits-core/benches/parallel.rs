//! Throughput of the three batch-level fan-outs, comparing the rayon path
//! against a sequential run of the same work. With the `parallel` feature
//! disabled both sides of each pair measure the sequential code.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fits_core::data::{generate_synthetic, generate_synthetic_seq, GeneratorConfig};
use fits_core::freq::{ct_dt_comparison, ct_dt_comparison_seq, log_grid};
use fits_core::train::{forward_backward, init_parameters, NetworkConfig};

fn generator() -> GeneratorConfig {
    GeneratorConfig {
        classes_hz: vec![4.0, 11.0, 30.0],
        channels: 16,
        t_bins: 200,
        dt: 0.004,
        base_rate: 0.25,
        depth: 0.9,
        train_per_class: 24,
        val_per_class: 8,
        seed: 5,
    }
}

fn bench_dataset_generation(c: &mut Criterion) {
    let cfg = generator();
    let mut g = c.benchmark_group("dataset-generation");
    g.sample_size(20);
    g.bench_function("parallel", |b| b.iter(|| black_box(generate_synthetic(&cfg).unwrap())));
    g.bench_function("sequential", |b| {
        b.iter(|| black_box(generate_synthetic_seq(&cfg).unwrap()))
    });
    g.finish();
}

fn bench_ct_dt_grid(c: &mut Criterion) {
    let grid = log_grid(1.0, 50.0, 16);
    let mut g = c.benchmark_group("ct-dt-grid");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| black_box(ct_dt_comparison(0.04, 0.2, 0.004, &grid, 1e-2).unwrap()))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| black_box(ct_dt_comparison_seq(0.04, 0.2, 0.004, &grid, 1e-2).unwrap()))
    });
    g.finish();
}

fn bench_batch_gradients(c: &mut Criterion) {
    let ds = generate_synthetic(&generator()).unwrap();
    let net_cfg = {
        let mut cfg = NetworkConfig::new(16, 3, &[24, 24]);
        cfg.seed = 3;
        cfg
    };
    let params = init_parameters(&net_cfg).unwrap();
    let batch: Vec<_> = ds.train.iter().take(32).collect();
    let labels: Vec<usize> = batch.iter().map(|r| r.label()).collect();

    let mut g = c.benchmark_group("batch-gradients");
    g.sample_size(10);
    g.bench_function("parallel", |b| {
        b.iter(|| black_box(forward_backward(&net_cfg, &params.block, &batch, &labels, None).unwrap()))
    });
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    g.bench_function("single-thread", |b| {
        b.iter(|| {
            single.install(|| {
                black_box(forward_backward(&net_cfg, &params.block, &batch, &labels, None).unwrap())
            })
        })
    });
    g.finish();
}

criterion_group!(benches, bench_dataset_generation, bench_ct_dt_grid, bench_batch_gradients);
criterion_main!(benches);
