use cmj_core::fixtures;
use cmj_core::forward::{simulate_replicates, RootChoice, SimConfig};
use cmj_core::parallel::Execution;
use cmj_core::spectral::SpectralData;
use cmj_core::verify::{dichotomy_curve, DichotomySettings};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn forward_replicates(c: &mut Criterion) {
    let m = fixtures::model("sym2").unwrap();
    let s = SpectralData::compute(&m).unwrap();
    let config = SimConfig::new(RootChoice::Pi, 4.0, vec![1.0, 2.0, 4.0]);
    let mut group = c.benchmark_group("forward_sym2_t4_x256");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| simulate_replicates(&m, &s, &config, 256, black_box(1), exec).unwrap())
        });
    }
    group.finish();
}

fn size_biased_curve(c: &mut Criterion) {
    let m = fixtures::model("asym2").unwrap();
    let s = SpectralData::compute(&m).unwrap();
    let settings = DichotomySettings { t_max: 4.0, replicates: 64, ..Default::default() };
    let mut group = c.benchmark_group("dichotomy_asym2_t4_x64");
    group.sample_size(20);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| dichotomy_curve(&m, &s, &settings, black_box(1), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forward_replicates, size_biased_curve);
criterion_main!(benches);
