//! End-to-end timings for short model fits on simulated count series, sized
//! so a full criterion run stays in minutes: these track the cost of one
//! MCMC iteration times a realistic chain length at small n.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use countproc_core::gp::{gp_fit, GpConfig};
use countproc_core::simbench::{benchmark_grid, gen_scenario4, subsample_equispaced};
use countproc_core::spline::{rpspline_fit, RpsplineConfig};
use countproc_core::RngStream;

fn small_fits(c: &mut Criterion) {
    let mut rng = RngStream::new(33);
    let path = gen_scenario4(&mut rng);
    let grid = benchmark_grid();
    let series_50 = subsample_equispaced(&grid, &path.counts, 50).expect("subsample");
    let series_100 = subsample_equispaced(&grid, &path.counts, 100).expect("subsample");

    let mut group = c.benchmark_group("model fits");
    group.sample_size(10);
    group.bench_function("rounded gp n 50", |b| {
        b.iter(|| {
            let cfg = GpConfig {
                n_iter: 100,
                burn_in: 50,
                thin: 1,
                seed: 1,
                ..GpConfig::default()
            };
            gp_fit(black_box(&series_50), &cfg).unwrap()
        })
    });
    group.bench_function("rounded pspline n 100", |b| {
        b.iter(|| {
            let cfg = RpsplineConfig {
                n_iter: 200,
                burn_in: 100,
                thin: 1,
                seed: 1,
                ..RpsplineConfig::default()
            };
            rpspline_fit(black_box(&series_100), &cfg).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, small_fits);
criterion_main!(benches);
