use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use halfweight::charsum;
use halfweight::hecke;
use halfweight::kernel::AfeConfig;
use halfweight::lfun;
use halfweight::space::CuspSpace;
use num_complex::Complex64;

fn space_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("space_build_ell6_n50000");
    g.sample_size(10);
    for parallel in [false, true] {
        let name = if parallel { "parallel" } else { "sequential" };
        g.bench_function(name, |b| b.iter(|| CuspSpace::new(6, black_box(50_000), parallel).unwrap()));
    }
    g.finish();
}

fn charsum_grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("charsum_grid_d200_m40");
    g.sample_size(10);
    for parallel in [false, true] {
        let name = if parallel { "parallel" } else { "sequential" };
        g.bench_function(name, |b| b.iter(|| charsum::verify_grid(6, black_box(200), 40, parallel).unwrap()));
    }
    g.finish();
}

fn lflat_point(c: &mut Criterion) {
    let bundle = hecke::extract_eigenform(6, &[3, 5, 7], 200_000, true).unwrap();
    let cfg = AfeConfig::default();
    let s = Complex64::new(1.2, 3.0);
    let mut g = c.benchmark_group("lflat_r21");
    g.sample_size(10);
    for parallel in [false, true] {
        let name = if parallel { "parallel" } else { "sequential" };
        g.bench_function(name, |b| b.iter(|| lfun::lflat(&bundle, black_box(s), 21, &cfg, parallel).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, space_build, charsum_grid, lflat_point);
criterion_main!(benches);
