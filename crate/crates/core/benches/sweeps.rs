use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use strong_hinf::asymptotic::{strong_norm_ta, AsymOptions};
use strong_hinf::exec::Exec;
use strong_hinf::fixtures;
use strong_hinf::levelset::{strong_hinf, NormOptions};
use strong_hinf::system::compute_nullspaces;
use strong_hinf::transfer::{log_space, sweep};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn frequency_sweep(c: &mut Criterion) {
    let sys = fixtures::neutral1(1.0, 2.0);
    let omegas = log_space(1e-2, 1e3, 2000);
    let mut g = c.benchmark_group("frequency_sweep");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| sweep(black_box(&sys), &omegas, 1, exec)));
    }
    g.finish();
}

fn theta_grid(c: &mut Criterion) {
    let sys = fixtures::neutral1(1.0, 2.0);
    let bases = compute_nullspaces(&sys);
    let mut g = c.benchmark_group("asymptotic_norm");
    for (name, exec) in MODES {
        let opts = AsymOptions { exec, points_per_dim: 120, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| strong_norm_ta(black_box(&sys), &bases, &opts).unwrap()));
    }
    g.finish();
}

fn strong_norm(c: &mut Criterion) {
    let sys = fixtures::table1_closed_loop(0.5, &[-3.5878, 1.5017]);
    let mut g = c.benchmark_group("strong_hinf");
    g.sample_size(20);
    for (name, exec) in MODES {
        let opts = NormOptions { exec, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| strong_hinf(black_box(&sys), &opts).unwrap()));
    }
    g.finish();
}

#[cfg(feature = "oracle")]
fn dense_oracle(c: &mut Criterion) {
    use strong_hinf::oracle::{dense_hinf, DenseSweepSpec};
    let sys = fixtures::neutral1(1.0, 2.0);
    let spec = DenseSweepSpec { points: 5000, ..Default::default() };
    let mut g = c.benchmark_group("dense_hinf");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| dense_hinf(black_box(&sys), &spec, exec).unwrap()));
    }
    g.finish();
}

#[cfg(not(feature = "oracle"))]
fn dense_oracle(_: &mut Criterion) {}

criterion_group!(benches, frequency_sweep, theta_grid, strong_norm, dense_oracle);
criterion_main!(benches);
