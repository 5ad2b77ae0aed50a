//! Pipeline kernel benchmarks: forward pass with capture, steered
//! generation, PC1 extraction, and mode aggregation.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use steerage_bench::{bench_model, random_answer_table, random_diffs};
use steerage_core::extraction::first_principal_component;
use steerage_core::its::{mode_aggregate, AggregationInput};
use steerage_core::runtime::{ByteTokenizer, GenerationParams, TokenSequence, Tokenizer};
use steerage_core::transfer::SteeringPlan;

fn forward_with_capture(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_with_capture");
    let tok = ByteTokenizer;
    let prompt = TokenSequence::new(tok.encode("benchmark prompt with a plausible length?"));
    for (layers, hidden) in [(4usize, 16usize), (6, 32), (8, 64)] {
        let model = bench_model(layers, hidden);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{layers}L x {hidden}d")),
            &model,
            |b, model| b.iter(|| model.forward_with_capture(black_box(&prompt)).unwrap()),
        );
    }
    group.finish();
}

fn steered_generation(c: &mut Criterion) {
    let model = bench_model(4, 32);
    let tok = ByteTokenizer;
    let prompt = TokenSequence::new(tok.encode("benchmark prompt?"));
    let mut plan = SteeringPlan::zero(model.spec());
    for v in plan.layer_vectors.iter_mut() {
        v[3] = 0.1;
    }
    let params = GenerationParams {
        max_new_tokens: 16,
        ..Default::default()
    };
    c.bench_function("generate_16_tokens_steered", |b| {
        b.iter(|| {
            model
                .generate_with_steering(black_box(&prompt), &plan, &params, &tok)
                .unwrap()
        })
    });
}

fn pc1_extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("first_principal_component");
    for dim in [16usize, 64, 256] {
        let diffs = random_diffs(100, dim, 7);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &diffs, |b, diffs| {
            b.iter(|| first_principal_component(black_box(diffs), true).unwrap())
        });
    }
    group.finish();
}

fn mode_aggregation(c: &mut Criterion) {
    let input = AggregationInput::new(random_answer_table(19, 3)).unwrap();
    c.bench_function("mode_aggregate_19_lambdas", |b| {
        b.iter(|| mode_aggregate(black_box(&input)))
    });
}

criterion_group!(
    benches,
    forward_with_capture,
    steered_generation,
    pc1_extraction,
    mode_aggregation
);
criterion_main!(benches);
