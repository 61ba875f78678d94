use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vnfplace::engine::{solve, SolveRequest};
use vnfplace::probability::answer_probability;
use vnfplace_bench::{heuristic, instance, wide_instance};

fn exhaustive_by_size(c: &mut Criterion) {
    let mut group = c.benchmark_group("exhaustive");
    for (nodes, len) in [(4, 3), (5, 3), (6, 4)] {
        let (chain, infra) = instance(nodes, len, 1);
        let chains = [chain];
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{nodes}n{len}s")),
            &(),
            |b, ()| b.iter(|| solve(&SolveRequest::default(), black_box(&chains), &infra).unwrap()),
        );
    }
    group.finish();
}

fn thresholds(c: &mut Criterion) {
    let (chain, infra) = wide_instance();
    let chains = [chain];
    let mut group = c.benchmark_group("heuristic");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    for t in [0.8, 0.6, 0.4] {
        let req = heuristic(t);
        group.bench_with_input(BenchmarkId::from_parameter(t), &req, |b, req| {
            b.iter(|| solve(req, black_box(&chains), &infra).unwrap().len())
        });
    }
    group.finish();
}

fn inference(c: &mut Criterion) {
    let (chain, infra) = instance(6, 4, 1);
    let answers = solve(&SolveRequest::default(), std::slice::from_ref(&chain), &infra).unwrap();
    let pre = Default::default();
    c.bench_function("answer_probability", |b| {
        b.iter(|| {
            answers
                .iter()
                .map(|a| answer_probability(black_box(a), &chain, &infra, &pre).unwrap())
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, exhaustive_by_size, thresholds, inference);
criterion_main!(benches);
