use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use tradeoff_bench::{set_exact_weight, workspace};
use tradeoff_core::metrics::{metric_table, EvalScope};
use tradeoff_core::service::{Service, ServiceOptions};

fn recompute(c: &mut Criterion) {
    let ws = workspace(1000, 16);
    let mut group = c.benchmark_group("recompute_1000x16");
    group.sample_size(20);

    let models: Vec<_> = ws.models().values().cloned().collect();
    let metrics: Vec<_> = ws.metrics().values().cloned().collect();
    let slices: Vec<_> = ws.slices().values().cloned().collect();
    let scope = EvalScope { dataset: ws.dataset(), objectives: ws.objectives() };
    group.bench_function("cold_metric_table", |b| {
        b.iter(|| metric_table(black_box(&models), ws.baseline(), &metrics, &slices, scope).unwrap())
    });

    let svc = Service::new(ws.clone(), ServiceOptions::default()).unwrap();
    let mut flip = false;
    group.bench_function("weight_change", |b| {
        b.iter(|| {
            flip = !flip;
            svc.mutate("bench", set_exact_weight(if flip { 1.5 } else { 0.2 })).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, recompute);
criterion_main!(benches);
