use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use selroute::{
    expected_density_of_progress, optimal_rm_given_phi, optimize_joint, PhiGrid, Tolerances,
};
use selroute_bench::{baseline, reference_region};

fn density(c: &mut Criterion) {
    let cfg = baseline(0.05);
    let region = reference_region();
    c.bench_function("density/closed_form", |b| {
        b.iter(|| expected_density_of_progress(black_box(&cfg), black_box(&region)))
    });
    c.bench_function("density/quadrature", |b| {
        b.iter(|| {
            selroute::model::expected_density_numeric(black_box(&cfg), black_box(&region)).unwrap()
        })
    });
}

fn optimizer(c: &mut Criterion) {
    let cfg = baseline(0.05);
    c.bench_function("optimize/rm_given_phi", |b| {
        b.iter(|| optimal_rm_given_phi(black_box(&cfg), 1.0, 1e-10).unwrap())
    });
    c.bench_function("optimize/joint_64", |b| {
        b.iter(|| {
            optimize_joint(black_box(&cfg), &PhiGrid::default(), &Tolerances::default()).unwrap()
        })
    });
}

criterion_group!(benches, density, optimizer);
criterion_main!(benches);
