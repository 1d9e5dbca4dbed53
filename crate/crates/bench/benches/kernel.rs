use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ici_bench::sample_pair;
use ici_core::kernel;

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for digits in [34u32, 1000] {
        let (a, b) = sample_pair(digits);
        group.bench_with_input(BenchmarkId::new("ici", digits), &digits, |bench, _| {
            bench.iter(|| kernel::ici_step(black_box(&a), black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ici_blind", digits), &digits, |bench, _| {
            bench.iter(|| kernel::ici_step_blind(black_box(&a), black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ici_averaged", digits), &digits, |bench, _| {
            bench.iter(|| kernel::ici_step_averaged(black_box(&a), black_box(&b)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("newton", digits), &digits, |bench, _| {
            bench.iter(|| kernel::newton_step(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, steps);
criterion_main!(benches);
