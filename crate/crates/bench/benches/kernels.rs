use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use grushin_core::kernel::{grushin_kernel, grushin_kernel_row, mehler_kernel};
use grushin_core::memory::build_weights;
use grushin_core::{KernelQuery, MehlerQuery, QuadratureSpec};

fn pointwise(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    let mut group = c.benchmark_group("kernel");
    for t in [0.1, 0.5, 1.0] {
        let q = KernelQuery::scalar(0.3, -0.2, 0.4, t).unwrap();
        group.bench_with_input(BenchmarkId::new("point", t), &q, |b, q| {
            b.iter(|| grushin_kernel(black_box(q), &spec).unwrap())
        });
    }
    group.bench_function("row_129", |b| {
        b.iter(|| grushin_kernel_row(&[0.3], &[0.0], 0.5, -4.0, 1.0 / 16.0, 129, &spec).unwrap())
    });
    let m = MehlerQuery::scalar(1.3, 0.4, -0.7, 0.5).unwrap();
    group.bench_function("mehler", |b| b.iter(|| mehler_kernel(black_box(&m))));
    group.finish();
}

fn memory_weights(c: &mut Criterion) {
    let mut group = c.benchmark_group("memory_weights");
    for steps in [128usize, 512, 2048] {
        group.bench_with_input(BenchmarkId::from_parameter(steps), &steps, |b, &n| {
            b.iter(|| build_weights(0.5, 1.0 / 256.0, n).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pointwise, memory_weights);
criterion_main!(benches);
