//! Benchmarks of the solver cores at small-to-moderate truncations. The
//! full 3x30 master solve runs tens of seconds and is covered by the
//! acceptance suite timing instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use quadcool::fock::HilbertDims;
use quadcool::kinetics;
use quadcool::lindblad::{self, CavityRateConvention, SteadySolver};
use quadcool::rates::{self, SystemParams};
use quadcool::squeeze::OverlapMatrix;

fn fig1(g: f64, delta: f64) -> SystemParams {
    SystemParams::new(g, 0.25, delta, 0.1, 1e-6, 10.0).unwrap()
}

fn bench_overlap_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("overlap_matrix");
    for dim in [60usize, 120, 240] {
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, &dim| {
            b.iter(|| OverlapMatrix::new(black_box(0.3589), black_box(dim)).unwrap());
        });
    }
    group.finish();
}

fn bench_rate_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("rate_matrix");
    for n_states in [20usize, 50] {
        let params = fig1(0.1, -2.0);
        group.bench_with_input(
            BenchmarkId::from_parameter(n_states),
            &n_states,
            |b, &n| {
                b.iter(|| rates::rate_matrix(black_box(&params), black_box(n), 0).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_kinetics_steady(c: &mut Criterion) {
    let params = fig1(0.1, -2.0);
    let rm = rates::rate_matrix(&params, 50, 0).unwrap();
    let gen = kinetics::build_generator(&rm, &params);
    c.bench_function("kinetics_steady_50", |b| {
        b.iter(|| kinetics::steady_distribution(black_box(&gen)).unwrap());
    });
}

fn bench_master_steady(c: &mut Criterion) {
    let mut group = c.benchmark_group("master_steady");
    group.sample_size(10);
    for phonon in [8usize, 12] {
        let dims = HilbertDims::new(3, phonon).unwrap();
        let params = fig1(0.1, 0.0);
        group.bench_with_input(
            BenchmarkId::from_parameter(phonon),
            &phonon,
            |b, _| {
                b.iter(|| {
                    let liou =
                        lindblad::liouvillian(&params.with_delta(-2.0), &dims, CavityRateConvention::FullKappa)
                            .unwrap();
                    lindblad::steady_state(black_box(&liou)).unwrap()
                });
            },
        );
    }
    group.finish();
}

fn bench_sweep_step(c: &mut Criterion) {
    // Anchored solver stepping along a detuning grid: the production
    // pattern of the sweep command.
    let dims = HilbertDims::new(3, 12).unwrap();
    let params = fig1(0.1, 0.0);
    c.bench_function("sweep_step_3x12", |b| {
        let mut solver =
            SteadySolver::new(&params, &dims, CavityRateConvention::FullKappa).unwrap();
        let mut delta = -3.0;
        b.iter(|| {
            delta += 0.02;
            if delta > -1.0 {
                delta = -3.0;
            }
            solver.solve_at(black_box(delta)).unwrap()
        });
    });
}

criterion_group!(
    benches,
    bench_overlap_matrix,
    bench_rate_matrix,
    bench_kinetics_steady,
    bench_master_steady,
    bench_sweep_step
);
criterion_main!(benches);
