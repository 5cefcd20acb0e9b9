use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stiffode::integrate::{integrate_adaptive, integrate_fixed, Scheme};
use stiffode::SolverConfig;
use stiffode_bench::{dahlquist, van_der_pol};

fn adaptive_dahlquist(c: &mut Criterion) {
    let mut group = c.benchmark_group("adaptive dahlquist");
    let config = SolverConfig::default();
    for lambda in [-1.0, -1e3, -1e6] {
        let problem = dahlquist(lambda, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(lambda), &problem, |b, p| {
            b.iter(|| integrate_adaptive(black_box(p), &config).unwrap())
        });
    }
    group.finish();
}

fn adaptive_van_der_pol(c: &mut Criterion) {
    let mut group = c.benchmark_group("adaptive van_der_pol");
    group.sample_size(10);
    let config = SolverConfig::with_tolerances(1e-6, 1e-6);
    for mu in [1.0, 100.0, 1000.0] {
        let problem = van_der_pol(mu, 10.0);
        group.bench_with_input(BenchmarkId::from_parameter(mu), &problem, |b, p| {
            b.iter(|| integrate_adaptive(black_box(p), &config).unwrap())
        });
    }
    group.finish();
}

fn fixed_bdf(c: &mut Criterion) {
    let problem = dahlquist(-50.0, 1.0);
    c.bench_function("fixed bdf4 h=1e-3 dahlquist(-50)", |b| {
        b.iter(|| integrate_fixed(black_box(&problem), Scheme::Bdf, 4, 1e-3).unwrap())
    });
}

criterion_group!(benches, adaptive_dahlquist, adaptive_van_der_pol, fixed_bdf);
criterion_main!(benches);
