use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdist_bench::random_pair;
use qdist_core::channels::random_unitary;
use qdist_core::estimation::{build_plan_pauli_minimal, run_plan, ShotModel};
use qdist_core::process_metrics::{ave_measure_mc, j_distance, j_fidelity, stabilized, Metric};
use qdist_core::{rng, OptimizerConfig};

fn j_measures(c: &mut Criterion) {
    let mut group = c.benchmark_group("j-measures");
    for dim in [2, 4, 8] {
        let (e, f) = random_pair(dim, 1);
        group.bench_with_input(BenchmarkId::new("distance", dim), &dim, |b, _| {
            b.iter(|| j_distance(black_box(&e), black_box(&f)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fidelity", dim), &dim, |b, _| {
            b.iter(|| j_fidelity(black_box(&e), black_box(&f)).unwrap())
        });
    }
    group.finish();
}

fn stabilized_measures(c: &mut Criterion) {
    let mut group = c.benchmark_group("stabilized");
    group.sample_size(10);
    let config = OptimizerConfig {
        restarts: 1,
        ..OptimizerConfig::with_seed(3)
    };
    for dim in [2, 4] {
        let (e, f) = random_pair(dim, 2);
        for metric in [Metric::Distance, Metric::Fidelity] {
            group.bench_with_input(
                BenchmarkId::new(format!("{metric:?}").to_lowercase(), dim),
                &dim,
                |b, _| b.iter(|| stabilized(black_box(&e), black_box(&f), metric, &config).unwrap()),
            );
        }
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let (e, f) = random_pair(2, 4);
    c.bench_function("average-fidelity-mc-1e4", |b| {
        b.iter(|| ave_measure_mc(black_box(&e), black_box(&f), Metric::Fidelity, 10_000, 5).unwrap())
    });
    let u = random_unitary(4, &mut rng::seeded(6));
    let (e4, _) = random_pair(4, 6);
    let plan = build_plan_pauli_minimal(&u, 2).unwrap();
    c.bench_function("pauli-minimal-plan-d4", |b| {
        b.iter(|| build_plan_pauli_minimal(black_box(&u), 2).unwrap())
    });
    c.bench_function("run-plan-d4-1e6-shots", |b| {
        let shots = ShotModel {
            shots_per_setting: 1_000_000,
            seed: 7,
        };
        b.iter(|| run_plan(black_box(&plan), black_box(&e4), &shots).unwrap())
    });
}

criterion_group!(benches, j_measures, stabilized_measures, sampling);
criterion_main!(benches);
