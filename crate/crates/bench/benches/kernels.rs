use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use delu_bench::{problem, trained_network};
use delu_core::{gradient_inference, lp_inference, oracle_optimal_contract, BarrierConfig};

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    for (m, n) in [(2, 8), (5, 32), (10, 64)] {
        let (p, f_max) = problem(m, n);
        group.bench_with_input(BenchmarkId::from_parameter(format!("m{m}_n{n}")), &p, |b, p| {
            b.iter(|| oracle_optimal_contract(black_box(p), f_max).unwrap())
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let (net, probes, _) = trained_network(5, 16, 500);
    let x = probes[0].pay().to_vec();
    c.bench_function("forward", |b| b.iter(|| net.forward(black_box(&x)).unwrap()));
    c.bench_function("backward", |b| b.iter(|| net.backward(black_box(&x), 1.0).unwrap()));
}

fn inference(c: &mut Criterion) {
    let mut group = c.benchmark_group("inference");
    group.sample_size(10);
    for m in [2, 5] {
        let (net, probes, f_max) = trained_network(m, 16, 1000);
        group.bench_function(BenchmarkId::new("lp", m), |b| {
            b.iter(|| lp_inference(&net, black_box(&probes), f_max).unwrap())
        });
        let starts = &probes[..100];
        let cfg = BarrierConfig::default();
        group.bench_function(BenchmarkId::new("grad", m), |b| {
            b.iter(|| gradient_inference(&net, black_box(starts), &cfg, f_max).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle, network, inference);
criterion_main!(benches);
