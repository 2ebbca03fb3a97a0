use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use impctl_core::cg::{self, CgSettings};
use impctl_core::control::{gramian_apply, synthesize, KMode};
use impctl_core::ensemble::gaussian_field;
use impctl_core::semigroup::{spectral_decomposition, Propagator};
use impctl_core::{DegenOperator, Grid, ProblemSpec, TimeStepping};

fn setup(n: usize) -> (DegenOperator, ProblemSpec) {
    let spec = ProblemSpec::new(0.5, 1.0, 1.0, 0.3, 0.5, 1.0, 0.1).unwrap();
    (DegenOperator::assemble(&Grid::new(n).unwrap(), &spec).unwrap(), spec)
}

fn operator_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_apply");
    for n in [200, 800, 3200] {
        let (op, _) = setup(n);
        let u = gaussian_field(op.grid(), 0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| b.iter(|| op.apply(black_box(u)).unwrap()));
    }
    group.finish();
}

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("crank_nicolson_unit_horizon");
    group.sample_size(20);
    for n in [200, 400] {
        let (op, _) = setup(n);
        let prop = Propagator::new(&op, TimeStepping::default_for(1.0)).unwrap();
        let u = gaussian_field(op.grid(), 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| prop.advance(black_box(u), 1.0).unwrap())
        });
    }
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_decomposition");
    group.sample_size(10);
    for n in [100, 400] {
        let (op, _) = setup(n);
        group.bench_function(BenchmarkId::from_parameter(n), |b| b.iter(|| spectral_decomposition(black_box(&op)).unwrap()));
    }
    group.finish();
}

fn gramian(c: &mut Criterion) {
    let (op, spec) = setup(400);
    let st = TimeStepping::default_for(1.0);
    let v = gaussian_field(op.grid(), 2);
    c.bench_function("gramian_apply/400", |b| b.iter(|| gramian_apply(&op, black_box(&v), &spec, st).unwrap()));
}

fn conjugate_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("cg");
    group.sample_size(10);
    let (op, spec) = setup(200);
    let g = op.grid().clone();
    let st = TimeStepping::default_for(1.0);
    let rhs = gaussian_field(&g, 3);
    let settings = CgSettings { tol: 1e-10, max_iter: g.n(), max_restarts: 3 };
    group.bench_function("shifted_gramian/200", |b| {
        b.iter(|| {
            let apply = |v: &impctl_core::Field| {
                let mut out = gramian_apply(&op, v, &spec, st)?;
                out.axpy(1e-2, v);
                Ok(out)
            };
            cg::solve(&g, apply, black_box(&rhs), None, settings).unwrap()
        })
    });
    let y0 = spectral_decomposition(&op).unwrap().eigenfields[0].clone();
    group.bench_function("synthesize_practical/200", |b| {
        b.iter(|| synthesize(&op, black_box(&y0), &spec, KMode::Practical { k: 10.0 }, st, 1e-10).unwrap())
    });
    group.finish();
}

criterion_group!(benches, operator_apply, propagation, spectral, gramian, conjugate_gradient);
criterion_main!(benches);
