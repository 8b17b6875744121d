use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use thermal_ballast::exec::Execution;
use thermal_ballast::synthetic::{one_month_scenario, C_TH_MEDIUM};
use thermal_ballast::tuner::{sweep, SweepSpec};

fn bench_sweep(c: &mut Criterion) {
    let scenario = one_month_scenario(C_TH_MEDIUM);
    let spec = SweepSpec::default();
    let mut group = c.benchmark_group("sweep_one_month_320_cells");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| sweep(black_box(&scenario), &spec, Execution::Sequential).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| sweep(black_box(&scenario), &spec, Execution::Parallel { threads: 0 }).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
