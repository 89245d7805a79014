use std::hint::black_box;

use cbs_core::model::intensity_sweep;
use cbs_core::resolvent::Propagator;
use cbs_core::spectrum::uniform_grid;
use cbs_core::steady_state::{perturbative_steady_state_with, ChannelOperators};
use cbs_core::{assemble, DriveConfig, PointSolver};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn assembly(c: &mut Criterion) {
    let drive = DriveConfig::new(5.0, 2.0).unwrap();
    let geom = PointSolver::new(&drive).unwrap().geometry;
    c.bench_function("assemble generators", |b| {
        b.iter(|| assemble(black_box(&drive), black_box(&geom)).unwrap())
    });
    let gen = assemble(&drive, &geom).unwrap();
    c.bench_function("schur propagator", |b| b.iter(|| Propagator::new(black_box(&gen)).unwrap()));
    let prop = Propagator::new(&gen).unwrap();
    let ops = ChannelOperators::from_generators(&gen);
    c.bench_function("second-order steady state", |b| {
        b.iter(|| perturbative_steady_state_with(black_box(&gen), &prop, &ops).unwrap())
    });
}

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectrum");
    group.sample_size(10);
    for rabi in [1.0, 20.0] {
        let solver = PointSolver::new(&DriveConfig::new(rabi, 0.0).unwrap()).unwrap();
        let one = [0.3];
        group.bench_with_input(BenchmarkId::new("single point", rabi), &one, |b, g| {
            b.iter(|| solver.spectrum(black_box(g)).unwrap())
        });
        let grid = uniform_grid(-4.0 * rabi, 4.0 * rabi, 201).unwrap();
        group.bench_with_input(BenchmarkId::new("201 points", rabi), &grid, |b, g| {
            b.iter(|| solver.spectrum(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("intensity sweep");
    group.sample_size(10);
    for n in [4usize, 32] {
        let points: Vec<DriveConfig> = (0..n)
            .map(|k| DriveConfig::new(0.1 * 10f64.powf(4.0 * k as f64 / n as f64), 1.0).unwrap())
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &points, |b, p| {
            b.iter(|| intensity_sweep(black_box(p)))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, spectra, sweeps);
criterion_main!(benches);
