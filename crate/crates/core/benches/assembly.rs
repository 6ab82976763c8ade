use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tracestokes::assembly::{assemble_a, assemble_c, FormParameters, FormVariant, Stabilization};
use tracestokes::experiments::{Discretization, Pair, Surface};
use tracestokes::par::ExecMode;

const MODES: [(ExecMode, &str); 2] = [
    (ExecMode::Sequential, "sequential"),
    (ExecMode::Parallel, "parallel"),
];

fn velocity_form(c: &mut Criterion) {
    let phi = Surface::Sphere.level_set();
    let mut group = c.benchmark_group("assemble_a");
    group.sample_size(10);
    for level in [2, 3] {
        for (mode, name) in MODES {
            let d = Discretization::build(&phi, level, Pair::P2P1, Some(2), mode).unwrap();
            let params = FormParameters::scaled(d.h(), 1.0, 1.0, -1, 1.0, FormVariant::Consistent);
            group.bench_with_input(BenchmarkId::new(name, level), &d, |b, d| {
                b.iter(|| assemble_a(&d.context(), black_box(&params)).unwrap())
            });
        }
    }
    group.finish();
}

fn pressure_stabilization(c: &mut Criterion) {
    let phi = Surface::Torus.level_set();
    let mut group = c.benchmark_group("assemble_c_full");
    group.sample_size(10);
    for (mode, name) in MODES {
        let d = Discretization::build(&phi, 3, Pair::P1P1, Some(2), mode).unwrap();
        let rho = d.h();
        group.bench_function(name, |b| {
            b.iter(|| assemble_c(&d.context(), Stabilization::Full, black_box(rho)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, velocity_form, pressure_stabilization);
criterion_main!(benches);
