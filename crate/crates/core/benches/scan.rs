use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use egoscan::detect::egonet_pvalues_with;
use egoscan::fit::fit;
use egoscan::models::{generate, make_simulation_spec, ModelKind};
use egoscan::par::Execution;
use egoscan::sim::{run_outcomes, SimConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn egonet_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("egonet_scan");
    group.sample_size(20);
    for (kind, n) in [
        (ModelKind::ErdosRenyi, 2000),
        (ModelKind::ChungLu, 2000),
        (ModelKind::Dcsbm, 1000),
    ] {
        let spec = make_simulation_spec(kind, n, 1).unwrap();
        let g = generate(&spec, 2).unwrap();
        let fm = fit(&g, kind, kind.simulation_communities(), 3).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, format!("{kind}/{n}")), &exec, |b, &exec| {
                b.iter(|| egonet_pvalues_with(black_box(&g), &fm, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn replicates(c: &mut Criterion) {
    let mut group = c.benchmark_group("replicates");
    group.sample_size(10);
    for kind in [ModelKind::ErdosRenyi, ModelKind::Sbm] {
        let mut cfg = SimConfig::new(kind, 500);
        cfg.clique_sizes = vec![0, 10];
        cfg.replicates = 8;
        // threads = 1 runs replicates sequentially; 0 uses the global pool
        for (name, threads) in [("sequential", 1), ("parallel", 0)] {
            cfg.threads = threads;
            group.bench_with_input(BenchmarkId::new(name, kind), &cfg, |b, cfg| {
                b.iter(|| run_outcomes(black_box(cfg)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, egonet_scan, replicates);
criterion_main!(benches);
