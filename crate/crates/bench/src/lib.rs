//! Benchmark bodies, kept in a library so `benches/main.rs` stays a stub.

use std::hint::black_box;

use criterion::Criterion;
use kmax_core::embedding::{distortion_report, rademacher_average, sphere_points, EmbeddingSpec};
use kmax_core::family::{builtin, verify_conditions};
use kmax_core::field::make_field;
use kmax_core::order_stats::check_bounds;
use kmax_core::orlicz::{conjugate, luxemburg_norm, mstar_from_rv, OrliczFunction, QuantileFunction};
use kmax_core::{BivariateFunction, ExpectationMode};

pub fn field(c: &mut Criterion) {
    c.bench_function("make_field 256", |b| b.iter(|| make_field(black_box(256)).unwrap()));
    let f = make_field(243).unwrap();
    c.bench_function("gf243 mul sweep", |b| {
        b.iter(|| (0..243u32).fold(1u32, |acc, x| f.add(f.mul(acc, x), 1)))
    });
}

pub fn order_stats(c: &mut Criterion) {
    let affine = builtin("affine:9").unwrap();
    c.bench_function("verify affine:9", |b| b.iter(|| verify_conditions(black_box(&affine)).unwrap()));

    let sym = builtin("sym:5").unwrap();
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|i| (0..5).map(|j| ((i * 7 + j * 3) % 11) as f64).collect())
        .collect();
    let a = BivariateFunction::from_matrix(rows).unwrap();
    c.bench_function("check_bounds sym:5 ell=2 exact", |b| {
        b.iter(|| check_bounds(&a, &sym, 2, 1.25, ExpectationMode::Exact).unwrap())
    });
}

pub fn orlicz(c: &mut Criterion) {
    let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
    let m = OrliczFunction::power(2.5, 1.0).unwrap();
    c.bench_function("luxemburg power 64", |b| b.iter(|| luxemburg_norm(&m, black_box(&x))));
    c.bench_function("conjugate power 2.5", |b| b.iter(|| conjugate(black_box(&m))));
    c.bench_function("mstar exponential ell=3", |b| {
        b.iter(|| mstar_from_rv(&QuantileFunction::Exponential, black_box(3)).unwrap())
    });
}

pub fn embedding(c: &mut Criterion) {
    let u: Vec<f64> = (1..=16).map(f64::from).collect();
    c.bench_function("rademacher 16", |b| b.iter(|| rademacher_average(black_box(&u)).unwrap()));
    let probes = sphere_points(5, 32, 1);
    let (spec, _) = EmbeddingSpec::affine(vec![1.0; 5], 0.25, &probes, 1).unwrap();
    let mut group = c.benchmark_group("distortion");
    group.sample_size(10);
    group.bench_function("n=5 samples=20", |b| b.iter(|| distortion_report(&spec, 20, 2).unwrap()));
    group.finish();
}
