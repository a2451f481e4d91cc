use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rendezkit::confopt::{nth_diameter, SearchOptions};
use rendezkit::energyopt::w_energy;
use rendezkit::game::{q_lower, q_value};
use rendezkit::space::{build_circle_grid, build_interval_grid};
use rendezkit::{CircleMetric, Kernel};

fn games(c: &mut Criterion) {
    let mut group = c.benchmark_group("game");
    for n in [16, 64] {
        let circle = build_circle_grid(n, CircleMetric::Chordal).unwrap();
        let all = circle.all();
        group.bench_with_input(BenchmarkId::new("q_circle", n), &n, |b, _| {
            b.iter(|| q_value(black_box(&circle), &all, &all).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("qlower_circle", n), &n, |b, _| {
            b.iter(|| q_lower(black_box(&circle), &all, &all).unwrap())
        });
    }
    group.finish();
}

fn diameters(c: &mut Criterion) {
    let mut group = c.benchmark_group("diameter");
    group.sample_size(10);
    let grid = build_interval_grid(0.0, 1.0, 65, Kernel::NegLog).unwrap();
    let all = grid.all();
    group.bench_function("exact_n3_neglog65", |b| {
        b.iter(|| nth_diameter(black_box(&grid), &all, 3, &SearchOptions::exact()).unwrap())
    });
    group.bench_function("local_n8_neglog65", |b| {
        b.iter(|| nth_diameter(black_box(&grid), &all, 8, &SearchOptions::local(0)).unwrap())
    });
    group.finish();
}

fn energies(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    group.sample_size(10);
    for n in [10, 40] {
        let grid = build_interval_grid(0.0, 1.0, n, Kernel::Euclid).unwrap();
        let all = grid.all();
        group.bench_with_input(BenchmarkId::new("w_euclid", n), &n, |b, _| {
            b.iter(|| w_energy(black_box(&grid), &all).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, games, diameters, energies);
criterion_main!(benches);
