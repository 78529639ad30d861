use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uhrfrac_core::solver::Discretization;
use uhrfrac_core::*;

fn kernel_weights(c: &mut Criterion) {
    let s = builtin_scenario("example-rl").unwrap();
    let mut group = c.benchmark_group("kernel_weights");
    for n in [32, 64, 128] {
        let mesh = s.problem.mesh(n, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &mesh, |b, mesh| {
            b.iter(|| KernelWeights::new(&s.problem.psi, 0.5, mesh, 0.5).unwrap())
        });
    }
    group.finish();
}

fn omega(c: &mut Criterion) {
    let mut group = c.benchmark_group("omega_apply");
    for name in SCENARIO_NAMES {
        let s = builtin_scenario(name).unwrap();
        let mesh = s.problem.mesh(64, 2.0).unwrap();
        let disc = Discretization::new(&s.problem, mesh.clone()).unwrap();
        let y = picard_solve(&s.problem, mesh, &SolveOptions::default()).unwrap().y0;
        group.bench_function(name, |b| {
            b.iter(|| uhrfrac_core::solver::omega_apply_with(&s.problem, &disc, black_box(&y), false).unwrap())
        });
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let mut group = c.benchmark_group("picard_solve");
    group.sample_size(10);
    for name in SCENARIO_NAMES {
        let s = builtin_scenario(name).unwrap();
        for n in [32, 64] {
            let mesh = s.problem.mesh(n, 2.0).unwrap();
            group.bench_with_input(BenchmarkId::new(name, n), &mesh, |b, mesh| {
                b.iter(|| picard_solve(&s.problem, mesh.clone(), &SolveOptions::default()).unwrap())
            });
        }
    }
    group.finish();
}

fn mittag_leffler_series(c: &mut Criterion) {
    let mut group = c.benchmark_group("mittag_leffler");
    for alpha in [0.5, 1.0] {
        group.bench_with_input(BenchmarkId::from_parameter(alpha), &alpha, |b, &alpha| {
            b.iter(|| mittag_leffler(alpha, black_box(2.0), 1e-15).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernel_weights, omega, picard, mittag_leffler_series);
criterion_main!(benches);
