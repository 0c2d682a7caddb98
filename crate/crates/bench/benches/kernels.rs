//! Microbenchmarks for the sampling kernels every model fit spends its
//! time in: truncated normal draws, the rectangle-restricted multivariate
//! normal sweep, the jittered Cholesky factorization, and B-spline design
//! matrix evaluation.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::DVector;

use countproc_core::gp::correlation_matrix;
use countproc_core::samplers::{
    cholesky_with_jitter, sample_tmvn_slice, sample_truncnorm, MvnParams, Rectangle,
};
use countproc_core::spline::BSplineBasis;
use countproc_core::RngStream;

fn truncated_normal(c: &mut Criterion) {
    let mut rng = RngStream::new(7);
    c.bench_function("truncnorm central interval", |b| {
        b.iter(|| sample_truncnorm(black_box(0.3), 1.2, -0.5, 2.0, &mut rng).unwrap())
    });
    c.bench_function("truncnorm far tail", |b| {
        b.iter(|| sample_truncnorm(black_box(0.0), 1.0, 8.0, 9.0, &mut rng).unwrap())
    });
}

fn tmvn_sweep(c: &mut Criterion) {
    let n = 10;
    let locs: Vec<f64> = (0..n).map(|i| i as f64 * 0.3).collect();
    let params = MvnParams::from_covariance(DVector::zeros(n), correlation_matrix(1.0, &locs))
        .expect("valid covariance");
    let rect = Rectangle::new(vec![-1.0; n], vec![1.0; n]).expect("valid rectangle");
    let mut rng = RngStream::new(11);
    let mut current = DVector::from_element(n, 0.1);
    c.bench_function("tmvn slice sweep dim 10", |b| {
        b.iter(|| {
            current = sample_tmvn_slice(&params, &rect, &current, &mut rng).unwrap();
        })
    });
}

fn cholesky_ladder(c: &mut Criterion) {
    for &n in &[50usize, 200] {
        let locs: Vec<f64> = (0..n)
            .map(|i| 20.0 * i as f64 / (n - 1) as f64)
            .collect();
        let gram = correlation_matrix(0.5, &locs);
        c.bench_function(&format!("cholesky with jitter n {n}"), |b| {
            b.iter(|| cholesky_with_jitter(black_box(&gram)).unwrap())
        });
    }
}

fn bspline_design(c: &mut Criterion) {
    let basis = BSplineBasis::cubic_equispaced(0.0, 20.0, 20).expect("valid basis");
    let xs: Vec<f64> = (0..200).map(|i| 20.0 * i as f64 / 199.0).collect();
    c.bench_function("bspline design matrix 200x24", |b| {
        b.iter(|| basis.design_matrix(black_box(&xs)))
    });
}

criterion_group!(
    benches,
    truncated_normal,
    tmvn_sweep,
    cholesky_ladder,
    bspline_design
);
criterion_main!(benches);
