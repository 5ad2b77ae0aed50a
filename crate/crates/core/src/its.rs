//! Inference-time scaling: generate across the lambda grid and aggregate
//! each example's extracted answers by mode.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::SteeringVectorSet;
use crate::harness::report::sanitize_id;
use crate::harness::{
    evaluate, normalize_answer, DatasetRecord, EvalRecord, EvalReport, EvalSetup, LambdaTag,
};
use crate::parallel::run_indexed;
use crate::runtime::{Model, Tokenizer};
use crate::transfer::{build_plan, DimensionAdapter};
use crate::tuner::{LambdaGrid, SweepRow};

/// Per-lambda extracted answers for one example, ordered by lambda.
/// `None` is the NO_ANSWER sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationInput {
    entries: Vec<(f64, Option<String>)>,
}

impl AggregationInput {
    pub fn new(mut entries: Vec<(f64, Option<String>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("aggregation input".into()));
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite lambdas"));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidParam(format!(
                    "duplicate lambda {} in aggregation input",
                    w[0].0
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, Option<String>)] {
        &self.entries
    }
}

/// Outcome of mode aggregation for one example.
///
/// When every entry is the sentinel, `final_answer` is `None` and
/// `support_count` is 0; otherwise the final answer is the most frequent
/// non-sentinel answer and `support_count` counts its occurrences.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedResult {
    pub final_answer: Option<String>,
    pub support_count: usize,
    pub contributing_lambdas: Vec<f64>,
}

/// Most frequent non-sentinel answer; ties break toward the answer produced
/// at the smallest lambda among the tied answers. Total on any input.
pub fn mode_aggregate(input: &AggregationInput) -> AggregatedResult {
    // answer -> (count, index of first occurrence in lambda order)
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for (idx, (_, answer)) in input.entries.iter().enumerate() {
        if let Some(ans) = answer {
            let entry = counts.entry(ans.as_str()).or_insert((0, idx));
            entry.0 += 1;
        }
    }
    let winner = counts
        .iter()
        .min_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)))
        .map(|(ans, &(count, _))| (ans.to_string(), count));

    match winner {
        None => AggregatedResult {
            final_answer: None,
            support_count: 0,
            contributing_lambdas: Vec::new(),
        },
        Some((answer, count)) => {
            let contributing = input
                .entries
                .iter()
                .filter(|(_, a)| a.as_deref() == Some(answer.as_str()))
                .map(|&(l, _)| l)
                .collect();
            AggregatedResult {
                final_answer: Some(answer),
                support_count: count,
                contributing_lambdas: contributing,
            }
        }
    }
}

/// Per-example detail row of the aggregated results file: every per-lambda
/// answer, the mode, its support, and correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedRecord {
    pub example_id: String,
    pub per_lambda: Vec<(f64, Option<String>)>,
    pub mode_answer: Option<String>,
    pub support_count: usize,
    pub contributing_lambdas: Vec<f64>,
    pub gold: String,
    pub correct: bool,
}

/// Everything `run_with_its` produces: the aggregated report, its
/// per-example details, every per-lambda report, and the baseline.
#[derive(Debug, Clone)]
pub struct ItsOutcome {
    pub aggregated: EvalReport,
    pub details: Vec<AggregatedRecord>,
    pub per_lambda: Vec<SweepRow>,
    pub baseline: EvalReport,
}

/// Evaluate the test split at every grid lambda, then aggregate each
/// example's extracted answers by mode. Per-lambda reports are returned too;
/// they feed the accuracy-vs-lambda curves.
pub fn run_with_its(
    model: &Model,
    tokenizer: &dyn Tokenizer,
    set: &SteeringVectorSet,
    adapter: &DimensionAdapter,
    records: &[DatasetRecord],
    grid: &LambdaGrid,
    setup: &EvalSetup,
    workers: usize,
) -> Result<ItsOutcome> {
    if records.is_empty() {
        return Err(Error::EmptyInput("test split".into()));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid".into()));
    }

    let baseline = evaluate(model, tokenizer, None, records, setup)?;

    let values = grid.values();
    let per_lambda: Vec<SweepRow> = run_indexed(values.len(), workers, |i| {
        let lambda = values[i];
        let plan = build_plan(set, model.spec(), lambda, adapter)?;
        let report = evaluate(model, tokenizer, Some(&plan), records, setup)?;
        Ok(SweepRow {
            lambda,
            accuracy: report.accuracy,
            report,
        })
    })?;

    let mut details = Vec::with_capacity(records.len());
    let mut eval_records = Vec::with_capacity(records.len());
    let mut correct_count = 0usize;
    let mut unparsed = 0usize;
    for (idx, record) in records.iter().enumerate() {
        let entries: Vec<(f64, Option<String>)> = per_lambda
            .iter()
            .map(|row| {
                let r = &row.report.records[idx];
                debug_assert_eq!(r.example_id, record.id);
                (row.lambda, r.extracted.clone())
            })
            .collect();
        let input = AggregationInput::new(entries.clone())?;
        let aggregated = mode_aggregate(&input);
        let gold = normalize_answer(&record.answer);
        let correct = aggregated.final_answer.as_deref() == Some(gold.as_str());
        if aggregated.final_answer.is_none() {
            unparsed += 1;
        }
        if correct {
            correct_count += 1;
        }
        eval_records.push(EvalRecord {
            example_id: record.id.clone(),
            lambda: 0.0,
            raw_output: String::new(),
            extracted: aggregated.final_answer.clone(),
            correct,
        });
        details.push(AggregatedRecord {
            example_id: record.id.clone(),
            per_lambda: entries,
            mode_answer: aggregated.final_answer,
            support_count: aggregated.support_count,
            contributing_lambdas: aggregated.contributing_lambdas,
            gold,
            correct,
        });
    }

    let total = records.len();
    let aggregated = EvalReport {
        dataset_id: setup.dataset_id.clone(),
        source_model_id: setup.source_model_id.clone(),
        target_model_id: model.spec().model_id.clone(),
        lambda: LambdaTag::Its,
        accuracy: correct_count as f64 / total as f64,
        total,
        correct: correct_count,
        unparsed,
        records: eval_records,
        provenance: per_lambda
            .first()
            .and_then(|r| r.report.provenance.clone()),
    };

    Ok(ItsOutcome {
        aggregated,
        details,
        per_lambda,
        baseline,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DetailsHeader {
    dataset_id: String,
    source_model_id: String,
    target_model_id: String,
    grid: Vec<f64>,
    aggregated_accuracy: f64,
}

/// `<source>__<target>__<dataset>__ITS.details.jsonl`
pub fn details_file_name(outcome: &ItsOutcome) -> String {
    format!(
        "{}__{}__{}__ITS.details.jsonl",
        sanitize_id(&outcome.aggregated.source_model_id),
        sanitize_id(&outcome.aggregated.target_model_id),
        sanitize_id(&outcome.aggregated.dataset_id),
    )
}

/// Write the aggregated results file: a header line, then one
/// [`AggregatedRecord`] per line.
pub fn write_its_details(outcome: &ItsOutcome, path: &Path) -> Result<()> {
    let header = DetailsHeader {
        dataset_id: outcome.aggregated.dataset_id.clone(),
        source_model_id: outcome.aggregated.source_model_id.clone(),
        target_model_id: outcome.aggregated.target_model_id.clone(),
        grid: outcome.per_lambda.iter().map(|r| r.lambda).collect(),
        aggregated_accuracy: outcome.aggregated.accuracy,
    };
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| Error::InvalidParam(format!("details header serialization: {e}")))?;
    out.push(b'\n');
    for record in &outcome.details {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| Error::InvalidParam(format!("details record serialization: {e}")))?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read back the per-example rows of an aggregated results file.
pub fn read_its_details(path: &Path) -> Result<Vec<AggregatedRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
        path: path.into(),
        detail: "empty details file".into(),
    })?;
    let _header: DetailsHeader = serde_json::from_str(header_line).map_err(|e| Error::Parse {
        path: path.into(),
        detail: format!("header: {e}"),
    })?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.into(),
            detail: format!("line {}: {e}", idx + 1),
        })?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(entries: &[(f64, Option<&str>)]) -> AggregationInput {
        AggregationInput::new(
            entries
                .iter()
                .map(|(l, a)| (*l, a.map(String::from)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn plain_mode() {
        let result = mode_aggregate(&input(&[
            (0.01, Some("4")),
            (0.02, Some("4")),
            (0.03, Some("5")),
        ]));
        assert_eq!(result.final_answer.as_deref(), Some("4"));
        assert_eq!(result.support_count, 2);
        assert_eq!(result.contributing_lambdas, vec![0.01, 0.02]);
    }

    #[test]
    fn tie_goes_to_smallest_lambda_answer() {
        let result = mode_aggregate(&input(&[(0.01, Some("7")), (0.02, Some("9"))]));
        assert_eq!(result.final_answer.as_deref(), Some("7"));
        assert_eq!(result.support_count, 1);
    }

    #[test]
    fn all_sentinel_is_no_answer() {
        let result = mode_aggregate(&input(&[(0.01, None), (0.02, None)]));
        assert_eq!(result.final_answer, None);
        assert_eq!(result.support_count, 0);
        assert!(result.contributing_lambdas.is_empty());
    }

    #[test]
    fn sentinels_do_not_outvote_answers() {
        let result = mode_aggregate(&input(&[
            (0.01, None),
            (0.02, None),
            (0.03, None),
            (0.04, Some("8")),
        ]));
        assert_eq!(result.final_answer.as_deref(), Some("8"));
        assert_eq!(result.support_count, 1);
    }

    #[test]
    fn duplicate_lambdas_rejected() {
        assert!(AggregationInput::new(vec![(0.1, None), (0.1, None)]).is_err());
        assert!(AggregationInput::new(vec![]).is_err());
    }

    #[test]
    fn mode_matches_brute_force_count() {
        // independent oracle: count frequencies by scanning, pick max count
        // with smallest first-occurrence index
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(1..=12);
            let entries: Vec<(f64, Option<String>)> = (0..n)
                .map(|i| {
                    let ans = if rng.gen_bool(0.2) {
                        None
                    } else {
                        Some(rng.gen_range(0..4).to_string())
                    };
                    (0.01 * (i + 1) as f64, ans)
                })
                .collect();
            let inp = AggregationInput::new(entries.clone()).unwrap();
            let got = mode_aggregate(&inp);

            let mut best: Option<(String, usize, usize)> = None;
            for (idx, (_, a)) in entries.iter().enumerate() {
                if let Some(ans) = a {
                    let count = entries
                        .iter()
                        .filter(|(_, x)| x.as_deref() == Some(ans.as_str()))
                        .count();
                    let first = entries
                        .iter()
                        .position(|(_, x)| x.as_deref() == Some(ans.as_str()))
                        .unwrap();
                    let better = match &best {
                        None => true,
                        Some((_, bc, bf)) => count > *bc || (count == *bc && first < *bf),
                    };
                    if better && first == idx {
                        best = Some((ans.clone(), count, first));
                    }
                }
            }
            match best {
                None => assert_eq!(got.final_answer, None),
                Some((ans, count, _)) => {
                    assert_eq!(got.final_answer.as_deref(), Some(ans.as_str()));
                    assert_eq!(got.support_count, count);
                }
            }
        }
    }
}
