use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use volmellin::{
    build_estimate, log_gamma_complex, select_cutoff, simulate_cir, CIRParams, ComplexValue, CutoffRect, NoiseModel,
    PathConfig, SelectionConfig,
};
use volmellin_bench::{exp_ou_path, observation_pair};

fn special(c: &mut Criterion) {
    c.bench_function("log_gamma_complex", |b| {
        b.iter(|| log_gamma_complex(black_box(ComplexValue::new(0.5, 3.7))).unwrap())
    });
}

fn estimation(c: &mut Criterion) {
    let (noisy, direct) = observation_pair(5000, 1);
    let chi2 = NoiseModel::chi_squared_1();
    let k = CutoffRect::new(1.25, 1.25).unwrap();
    c.bench_function("ratio_table_n5000_k1.25", |b| b.iter(|| build_estimate(&noisy, &chi2, k, 0.05).unwrap()));
    let mut group = c.benchmark_group("select_cutoff_n5000");
    group.sample_size(10);
    group.bench_function("noisy", |b| b.iter(|| select_cutoff(&noisy, &chi2, &SelectionConfig::default()).unwrap()));
    group.bench_function("direct", |b| {
        b.iter(|| select_cutoff(&direct, &NoiseModel::noiseless(), &SelectionConfig::noiseless_default()).unwrap())
    });
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function("exp_ou_n5000", |b| b.iter(|| exp_ou_path(black_box(5000), 3)));
    let cfg = PathConfig { n: 5000, seed: 4, ..PathConfig::default() };
    let cir = CIRParams::with_gamma_target([2, 2]);
    group.bench_function("cir_n5000", |b| b.iter(|| simulate_cir(&cir, black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, special, estimation, simulation);
criterion_main!(benches);
