//! Cross-module pipeline tests on the planted toy models.

use steerage_core::extraction::{extract_steering_set, ExtractionOptions};
use steerage_core::harness::{
    build_contrastive_pairs, AnswerFormat, DatasetRecord, EvalSetup, PairTemplate, SplitMode,
    SplitSpec,
};
use steerage_core::its::{read_its_details, run_with_its, write_its_details};
use steerage_core::runtime::{planted_chain_model, ByteTokenizer, GenerationParams};
use steerage_core::transfer::DimensionAdapter;
use steerage_core::tuner::LambdaGrid;

fn toy_records(n: usize) -> Vec<DatasetRecord> {
    (0..n)
        .map(|i| DatasetRecord {
            id: format!("toy-{i:03}"),
            question: format!("Probe {i}: is the marker set?"),
            reasoning: Some("Check the marker.".into()),
            answer: if i % 5 == 4 { "3".into() } else { "7".into() },
        })
        .collect()
}

fn toy_setup() -> EvalSetup {
    EvalSetup {
        system_prompt: steerage_core::harness::prompts::TOY_SYSTEM_PROMPT.to_string(),
        split: SplitSpec::zero_shot(SplitMode::Test, 0),
        params: GenerationParams {
            max_new_tokens: 12,
            ..Default::default()
        },
        format: AnswerFormat::Boxed,
        dataset_id: "toy".into(),
        source_model_id: "toy-source".into(),
    }
}

#[test]
fn swapping_template_polarity_negates_every_direction() {
    let source = planted_chain_model("toy-source", 6, 256);
    let tok = ByteTokenizer;
    let records = toy_records(10);

    let default_pairs =
        build_contrastive_pairs(&records, &PairTemplate::question_with_solution_vs_question())
            .unwrap();
    let swapped_pairs = build_contrastive_pairs(&records, &PairTemplate::swapped()).unwrap();

    let opts = ExtractionOptions {
        dataset_id: "toy".into(),
        centered: true,
    };
    let forward = extract_steering_set(&source, &tok, &default_pairs, &opts).unwrap();
    let swapped = extract_steering_set(&source, &tok, &swapped_pairs, &opts).unwrap();

    for (a, b) in forward.directions.iter().zip(&swapped.directions) {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
        assert!(dot < -0.999, "cosine should be ~ -1, got {dot}");
    }
}

#[test]
fn singleton_grid_its_equals_that_lambdas_report() {
    let source = planted_chain_model("toy-source", 6, 256);
    let target = planted_chain_model("toy-target", 4, 256);
    let tok = ByteTokenizer;
    let records = toy_records(8);
    let pairs =
        build_contrastive_pairs(&records, &PairTemplate::question_with_solution_vs_question())
            .unwrap();
    let set = extract_steering_set(&source, &tok, &pairs, &ExtractionOptions::default()).unwrap();

    let grid = LambdaGrid::custom(vec![0.05]).unwrap();
    let outcome = run_with_its(
        &target,
        &tok,
        &set,
        &DimensionAdapter::identity(16),
        &records,
        &grid,
        &toy_setup(),
        1,
    )
    .unwrap();

    assert_eq!(outcome.per_lambda.len(), 1);
    let single = &outcome.per_lambda[0].report;
    assert_eq!(outcome.aggregated.accuracy, single.accuracy);
    for (agg, one) in outcome.aggregated.records.iter().zip(&single.records) {
        assert_eq!(agg.extracted, one.extracted);
        assert_eq!(agg.correct, one.correct);
    }
    // mode of a singleton has support 1 from that lambda
    for detail in &outcome.details {
        if detail.mode_answer.is_some() {
            assert_eq!(detail.support_count, 1);
            assert_eq!(detail.contributing_lambdas, vec![0.05]);
        }
    }
}

#[test]
fn its_details_file_round_trips() {
    let source = planted_chain_model("toy-source", 6, 256);
    let target = planted_chain_model("toy-target", 4, 256);
    let tok = ByteTokenizer;
    let records = toy_records(5);
    let pairs =
        build_contrastive_pairs(&records, &PairTemplate::question_with_solution_vs_question())
            .unwrap();
    let set = extract_steering_set(&source, &tok, &pairs, &ExtractionOptions::default()).unwrap();
    let grid = LambdaGrid::custom(vec![0.05, 0.2, 0.8]).unwrap();
    let outcome = run_with_its(
        &target,
        &tok,
        &set,
        &DimensionAdapter::identity(16),
        &records,
        &grid,
        &toy_setup(),
        1,
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("details.jsonl");
    write_its_details(&outcome, &path).unwrap();
    let loaded = read_its_details(&path).unwrap();
    assert_eq!(loaded, outcome.details);

    // replaying persisted per-lambda answers through the mode matches the
    // recorded aggregation
    for detail in &loaded {
        let input =
            steerage_core::its::AggregationInput::new(detail.per_lambda.clone()).unwrap();
        let replayed = steerage_core::its::mode_aggregate(&input);
        assert_eq!(replayed.final_answer, detail.mode_answer);
        assert_eq!(replayed.support_count, detail.support_count);
        assert_eq!(replayed.contributing_lambdas, detail.contributing_lambdas);
    }
}

#[test]
fn accuracy_times_total_is_the_correct_count() {
    let source = planted_chain_model("toy-source", 6, 256);
    let target = planted_chain_model("toy-target", 4, 256);
    let tok = ByteTokenizer;
    let records = toy_records(7);
    let pairs =
        build_contrastive_pairs(&records, &PairTemplate::question_with_solution_vs_question())
            .unwrap();
    let set = extract_steering_set(&source, &tok, &pairs, &ExtractionOptions::default()).unwrap();
    let report = steerage_core::harness::evaluate(&target, &tok, None, &records, &toy_setup()).unwrap();
    assert_eq!(report.accuracy * report.total as f64, report.correct as f64);
    assert!(report.records.iter().all(|r| !r.correct || r.extracted.is_some()));
}
