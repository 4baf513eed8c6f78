use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use combflow::exactnum::q;
use combflow::flux::Polynomial;
use combflow::riemann1d::scalar_riemann;
use combflow::{digit, eventual_shift, trace, verify_psi, CounterexampleFlux, Point2, TraceOptions};
use combflow_bench::{dyadic_points, single_sharp_field};

fn bench_digit(c: &mut Criterion) {
    let points = dyadic_points(256, 20);
    c.bench_function("digit/256_points_k10", |b| {
        b.iter(|| points.iter().map(|p| digit(black_box(&p.x2), 10).unwrap() as u32).sum::<u32>())
    });
}

fn bench_trace(c: &mut Criterion) {
    let field = single_sharp_field();
    let flux = CounterexampleFlux;
    let opts = TraceOptions::default();
    let y = Point2::new(q(1, 2), q(5, 1));
    c.bench_function("trace/single_rectangle", |b| {
        b.iter(|| trace(&field, &flux, black_box(&y), &q(12, 1), &opts).unwrap())
    });
    c.bench_function("eventual_shift/single_rectangle", |b| {
        b.iter(|| eventual_shift(&field, &flux, black_box(&y), &opts).unwrap())
    });
}

fn bench_psi(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_psi");
    group.sample_size(10);
    for k in [0, 2, 4] {
        group.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| b.iter(|| verify_psi(k, 100, 7).unwrap()));
    }
    group.finish();
}

fn bench_riemann(c: &mut Criterion) {
    let cubic = Polynomial::monomial(3, 1.0);
    c.bench_function("scalar_riemann/cubic_1_to_-1", |b| {
        b.iter(|| scalar_riemann(&cubic, black_box(1.0), black_box(-1.0)).unwrap())
    });
}

criterion_group!(benches, bench_digit, bench_trace, bench_psi, bench_riemann);
criterion_main!(benches);
