use std::hint::black_box;

use cfloor_bench::{baseline, sim_config, solved_table};
use cfloor_core::montecarlo::{simulate, LinearPolicy, TablePolicy};
use criterion::{criterion_group, criterion_main, Criterion};

fn policies(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_200x2500");
    group.sample_size(10);

    let merton = baseline(0.0, 0.0);
    let linear = LinearPolicy::merton(&merton).unwrap();
    let cfg = sim_config(1.0, 200);
    group.bench_function("merton", |b| {
        b.iter(|| simulate(&merton, &linear, black_box(&cfg)).unwrap())
    });

    let spec = baseline(0.02, 1.0);
    let table = solved_table(&spec);
    let policy = TablePolicy::new(&table);
    let cfg = sim_config(150.0, 200);
    group.bench_function("table", |b| {
        b.iter(|| simulate(&spec, &policy, black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, policies);
criterion_main!(benches);
