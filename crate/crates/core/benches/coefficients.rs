use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use strayfield::bench::{case_example1, case_example3};
use strayfield::quadrature::{compute_coefficients, Execution, ResolutionPolicy};

fn coefficients(c: &mut Criterion) {
    let mut group = c.benchmark_group("coefficients");
    group.sample_size(10);
    for (label, case, n) in [("ball", case_example1(), 30), ("cube", case_example3(), 20)] {
        let rule = ResolutionPolicy::default().rule_for(&case.domain, n).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let id = BenchmarkId::new(format!("{label}/{exec:?}"), n);
            group.bench_with_input(id, &n, |b, &n| {
                b.iter(|| compute_coefficients(black_box(n), case.field.as_ref(), &rule, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, coefficients);
criterion_main!(benches);
