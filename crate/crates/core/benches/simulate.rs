use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thermal_ballast::exec::Execution;
use thermal_ballast::synthetic::{full_year_scenario, C_TH_MEDIUM};

fn bench_simulate(c: &mut Criterion) {
    let scenario = full_year_scenario(C_TH_MEDIUM);
    let prepared = scenario.prepare().unwrap();
    let mut group = c.benchmark_group("full_year_30min");
    group.sample_size(20);
    group.bench_function("prepare", |b| b.iter(|| black_box(&scenario).prepare().unwrap()));
    group.bench_function("controlled", |b| b.iter(|| black_box(&prepared).run(true).unwrap()));
    group.bench_function("pair_sequential", |b| {
        b.iter(|| black_box(&prepared).run_pair(Execution::Sequential).unwrap())
    });
    group.bench_function("pair_parallel", |b| {
        b.iter(|| black_box(&prepared).run_pair(Execution::Parallel { threads: 0 }).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_simulate);
criterion_main!(benches);
