use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use slelab_core::energy::{dirichlet_energy, rho_energy_chordal, RhoMethod};
use slelab_core::loewner::{evolve_chordal, trace_chordal};
use slelab_core::partition::{bpz_residual, default_fd_step};
use slelab_core::rng::normal;
use slelab_core::sde::{simulate_dyson_chordal, SdeConfig};
use slelab_core::{DrivingPath, Geometry, StreamId};

fn brownian(n: usize, dt: f64) -> DrivingPath {
    let mut rng = StreamId::new(1, 0).rng(0);
    let mut w = vec![0.0];
    for _ in 0..n {
        let last = *w.last().unwrap();
        w.push(last + 2.0 * dt.sqrt() * normal(&mut rng));
    }
    DrivingPath::new(Geometry::Chordal, dt, w).unwrap()
}

fn sine(dt: f64) -> DrivingPath {
    DrivingPath::from_fn(Geometry::Chordal, dt, 0.5, |t| (2.0 * t).sin(), Some(&|t: f64| 2.0 * (2.0 * t).cos())).unwrap()
}

fn traces(c: &mut Criterion) {
    let mut g = c.benchmark_group("trace_chordal");
    g.sample_size(10);
    for n in [250, 500, 1000] {
        let p = brownian(n, 1.0 / n as f64);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| trace_chordal(p, f64::INFINITY).unwrap()));
    }
    g.finish();
}

fn flows(c: &mut Criterion) {
    let p = sine(1e-3);
    let z = [Complex64::new(0.5, 1.0), Complex64::new(-2.0, 0.3)];
    c.bench_function("evolve_chordal_2pts_500steps", |b| b.iter(|| evolve_chordal(&p, &z, 1).unwrap()));
}

fn energies(c: &mut Criterion) {
    let p = sine(5e-4);
    c.bench_function("dirichlet_1000", |b| b.iter(|| dirichlet_energy(&p, 0.5).unwrap()));
    let mut g = c.benchmark_group("rho_energy_chordal");
    for (name, m) in [("integral", RhoMethod::Integral), ("boundary", RhoMethod::Boundary)] {
        g.bench_function(name, |b| b.iter(|| rho_energy_chordal(&p, &[1.0, -1.0], &[2.0, 1.0], 0.5, m).unwrap()));
    }
    g.finish();
}

fn dyson(c: &mut Criterion) {
    let mut cfg = SdeConfig::new(2.0, 1e-3, 1.0);
    cfg.init = vec![-1.0, 0.0, 1.0];
    cfg.record_stride = 10;
    c.bench_function("dyson_chordal_n3_1000steps", |b| b.iter(|| simulate_dyson_chordal(&cfg).unwrap()));
}

fn bpz(c: &mut Criterion) {
    let x = [-1.0, 0.2, 1.5];
    let h = default_fd_step(Geometry::Chordal, &x);
    c.bench_function("bpz_residual_n3", |b| b.iter(|| bpz_residual(Geometry::Chordal, 2.0, 0.0, &x, h).unwrap()));
}

criterion_group!(benches, traces, flows, energies, dyson, bpz);
criterion_main!(benches);
