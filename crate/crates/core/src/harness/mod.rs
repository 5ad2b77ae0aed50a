//! Dataset ingestion, contrastive-pair construction, few-shot prompt
//! assembly, answer extraction, exact-match scoring, and report generation.

mod answer;
pub mod prompts;
pub mod report;

pub use answer::{extract_answer, normalize_answer, AnswerFormat};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::ContrastivePair;
use crate::runtime::{GenerationParams, Model, TokenSequence, Tokenizer};
use crate::transfer::{PlanProvenance, SteeringPlan};

/// One task example: a question, optional gold reasoning, and the gold
/// answer string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Train,
    Val,
    Test,
}

/// Split configuration: mode, the few-shot exemplars (disjoint from the
/// split's records by id), and the run seed.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub exemplars: Vec<DatasetRecord>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn zero_shot(mode: SplitMode, seed: u64) -> Self {
        Self {
            mode,
            exemplars: Vec::new(),
            seed,
        }
    }
}

/// Load a line-delimited dataset file. One JSON record per line; malformed
/// lines are reported with their line number; duplicate ids are rejected;
/// records whose id matches an exemplar are excluded.
pub fn load_split(path: &Path, spec: &SplitSpec) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let exemplar_ids: HashSet<&str> = spec.exemplars.iter().map(|r| r.id.as_str()).collect();
    let mut seen: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(line).map_err(|e| Error::Dataset {
                path: path.into(),
                line: line_no,
                detail: e.to_string(),
            })?;
        if record.answer.is_empty() {
            return Err(Error::Dataset {
                path: path.into(),
                line: line_no,
                detail: format!("record {:?} has an empty answer", record.id),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId { id: record.id });
        }
        if exemplar_ids.contains(record.id.as_str()) {
            continue;
        }
        records.push(record);
    }
    Ok(records)
}

/// Renders a record into the two sides of a contrastive pair. Placeholders:
/// `{question}`, `{reasoning}`, `{answer}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTemplate {
    pub positive: String,
    pub negative: String,
}

impl PairTemplate {
    /// The documented default convention: the concept-positive side is the
    /// question with its gold solution, the negative side the bare question.
    /// The paper-side construction for these datasets is unspecified; this
    /// template is the configurable reconstruction.
    pub fn question_with_solution_vs_question() -> Self {
        Self {
            positive: "{question}\n{reasoning}\n{answer}".into(),
            negative: "{question}".into(),
        }
    }

    /// Same pairing with the polarity swapped; flips every extracted
    /// direction's sign downstream.
    pub fn swapped() -> Self {
        let base = Self::question_with_solution_vs_question();
        Self {
            positive: base.negative,
            negative: base.positive,
        }
    }

    fn render_side(&self, template: &str, record: &DatasetRecord) -> Result<String> {
        let mut out = template.to_string();
        if out.contains("{reasoning}") {
            let reasoning = record.reasoning.as_deref().ok_or(Error::MissingReasoning {
                id: record.id.clone(),
            })?;
            out = out.replace("{reasoning}", reasoning);
        }
        out = out.replace("{question}", &record.question);
        out = out.replace("{answer}", &record.answer);
        Ok(out)
    }

    pub fn render(&self, record: &DatasetRecord) -> Result<(String, String)> {
        Ok((
            self.render_side(&self.positive, record)?,
            self.render_side(&self.negative, record)?,
        ))
    }
}

/// One contrastive pair per record, zero-shot (no exemplars on either side).
pub fn build_contrastive_pairs(
    records: &[DatasetRecord],
    template: &PairTemplate,
) -> Result<Vec<ContrastivePair>> {
    records
        .iter()
        .map(|r| {
            let (pos, neg) = template.render(r)?;
            ContrastivePair::new(pos, neg, r.id.clone())
        })
        .collect()
}

/// Deterministic prompt assembly: system prompt, then each exemplar as a
/// worked example, then the question. Bit-stable across runs.
pub fn assemble_prompt(record: &DatasetRecord, spec: &SplitSpec, system_prompt: &str) -> String {
    let mut out = String::new();
    out.push_str(system_prompt.trim_end());
    out.push_str("\n\n");
    for ex in &spec.exemplars {
        out.push_str(&ex.question);
        out.push('\n');
        if let Some(r) = &ex.reasoning {
            out.push_str(r);
            out.push('\n');
        }
        out.push_str(&ex.answer);
        out.push_str("\n\n");
    }
    out.push_str(&record.question);
    out
}

/// Per-example evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub example_id: String,
    pub lambda: f64,
    pub raw_output: String,
    /// `None` is the NO_ANSWER sentinel.
    pub extracted: Option<String>,
    pub correct: bool,
}

/// What a report's rows were generated with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LambdaTag {
    Baseline,
    Lambda(f64),
    Its,
}

impl LambdaTag {
    /// Filesystem-safe label used in report file names.
    pub fn label(&self) -> String {
        match self {
            LambdaTag::Baseline => "baseline".into(),
            LambdaTag::Lambda(l) => format!("lambda-{l}"),
            LambdaTag::Its => "ITS".into(),
        }
    }
}

/// Aggregated evaluation over one split at one steering setting.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_id: String,
    pub source_model_id: String,
    pub target_model_id: String,
    pub lambda: LambdaTag,
    pub accuracy: f64,
    pub total: usize,
    pub correct: usize,
    pub unparsed: usize,
    pub records: Vec<EvalRecord>,
    pub provenance: Option<PlanProvenance>,
}

/// Identifying metadata for a report.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub dataset_id: String,
    pub source_model_id: String,
    pub target_model_id: String,
    pub lambda: LambdaTag,
    pub provenance: Option<PlanProvenance>,
}

/// Raw generation output for one example, pre-scoring.
#[derive(Debug, Clone)]
pub struct ExampleOutput {
    pub example_id: String,
    pub raw_output: String,
    pub extracted: Option<String>,
}

/// Exact-match scoring. Outputs must be aligned with the records by
/// example id; accuracy is exactly correct / total.
pub fn score(records: &[DatasetRecord], outputs: &[ExampleOutput], meta: ReportMeta) -> Result<EvalReport> {
    if records.len() != outputs.len() {
        return Err(Error::IdMismatch(format!(
            "{} records vs {} outputs",
            records.len(),
            outputs.len()
        )));
    }
    let lambda_value = match meta.lambda {
        LambdaTag::Lambda(l) => l,
        _ => 0.0,
    };
    let mut eval_records = Vec::with_capacity(records.len());
    let mut correct = 0usize;
    let mut unparsed = 0usize;
    for (record, output) in records.iter().zip(outputs) {
        if record.id != output.example_id {
            return Err(Error::IdMismatch(format!(
                "record {:?} vs output {:?}",
                record.id, output.example_id
            )));
        }
        let gold = normalize_answer(&record.answer);
        let is_correct = match &output.extracted {
            Some(ans) => *ans == gold,
            None => false,
        };
        if output.extracted.is_none() {
            unparsed += 1;
        }
        if is_correct {
            correct += 1;
        }
        eval_records.push(EvalRecord {
            example_id: record.id.clone(),
            lambda: lambda_value,
            raw_output: output.raw_output.clone(),
            extracted: output.extracted.clone(),
            correct: is_correct,
        });
    }
    let total = records.len();
    Ok(EvalReport {
        dataset_id: meta.dataset_id,
        source_model_id: meta.source_model_id,
        target_model_id: meta.target_model_id,
        lambda: meta.lambda,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        total,
        correct,
        unparsed,
        records: eval_records,
        provenance: meta.provenance,
    })
}

/// Everything an evaluation run needs besides the records.
#[derive(Debug, Clone)]
pub struct EvalSetup {
    pub system_prompt: String,
    pub split: SplitSpec,
    pub params: GenerationParams,
    pub format: AnswerFormat,
    pub dataset_id: String,
    pub source_model_id: String,
}

/// Generate, extract, and score one split. `plan = None` is the baseline
/// run. Failures on individual examples are counted incorrect rather than
/// aborting, so metrics stay comparable across lambda values.
pub fn evaluate(
    model: &Model,
    tokenizer: &dyn Tokenizer,
    plan: Option<&SteeringPlan>,
    records: &[DatasetRecord],
    setup: &EvalSetup,
) -> Result<EvalReport> {
    let zero_plan;
    let (plan_ref, lambda_tag, provenance) = match plan {
        Some(p) => (
            p,
            LambdaTag::Lambda(p.lambda),
            Some(p.provenance.clone()),
        ),
        None => {
            zero_plan = SteeringPlan::zero(model.spec());
            (&zero_plan, LambdaTag::Baseline, None)
        }
    };

    let mut outputs = Vec::with_capacity(records.len());
    for record in records {
        let prompt_text = assemble_prompt(record, &setup.split, &setup.system_prompt);
        let prompt = TokenSequence::new(tokenizer.encode(&prompt_text));
        let raw = match model.generate_with_steering(&prompt, plan_ref, &setup.params, tokenizer) {
            Ok(out) => out.text,
            Err(e) => {
                log::warn!("example {}: generation failed ({e}); counted incorrect", record.id);
                String::new()
            }
        };
        let extracted = extract_answer(&raw, setup.format);
        outputs.push(ExampleOutput {
            example_id: record.id.clone(),
            raw_output: raw,
            extracted,
        });
    }

    score(
        records,
        &outputs,
        ReportMeta {
            dataset_id: setup.dataset_id.clone(),
            source_model_id: setup.source_model_id.clone(),
            target_model_id: model.spec().model_id.clone(),
            lambda: lambda_tag,
            provenance,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn record(id: &str, q: &str, reasoning: Option<&str>, a: &str) -> DatasetRecord {
        DatasetRecord {
            id: id.into(),
            question: q.into(),
            reasoning: reasoning.map(String::from),
            answer: a.into(),
        }
    }

    fn write_lines(lines: &[&str]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        (dir, path)
    }

    #[test]
    fn load_split_reads_well_formed_lines() {
        let lines: Vec<String> = (0..10)
            .map(|i| {
                format!(r#"{{"id":"r{i}","question":"q{i}?","reasoning":"because","answer":"{i}"}}"#)
            })
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let (_dir, path) = write_lines(&refs);
        let records = load_split(&path, &SplitSpec::zero_shot(SplitMode::Test, 0)).unwrap();
        assert_eq!(records.len(), 10);
        assert_eq!(records[3].id, "r3");
    }

    #[test]
    fn exemplar_ids_are_excluded() {
        let lines: Vec<String> = (0..10)
            .map(|i| format!(r#"{{"id":"r{i}","question":"q{i}?","answer":"{i}"}}"#))
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let (_dir, path) = write_lines(&refs);
        let spec = SplitSpec {
            mode: SplitMode::Test,
            exemplars: vec![record("r4", "q4?", None, "4")],
            seed: 0,
        };
        let records = load_split(&path, &spec).unwrap();
        assert_eq!(records.len(), 9);
        assert!(records.iter().all(|r| r.id != "r4"));
    }

    #[test]
    fn missing_answer_names_the_line() {
        let (_dir, path) = write_lines(&[
            r#"{"id":"a","question":"q?","answer":"1"}"#,
            r#"{"id":"b","question":"q?"}"#,
        ]);
        match load_split(&path, &SplitSpec::zero_shot(SplitMode::Test, 0)) {
            Err(Error::Dataset { line, detail, .. }) => {
                assert_eq!(line, 2);
                assert!(detail.contains("answer"), "{detail}");
            }
            other => panic!("expected dataset error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let (_dir, path) = write_lines(&[
            r#"{"id":"a","question":"q?","answer":"1"}"#,
            r#"{"id":"a","question":"q2?","answer":"2"}"#,
        ]);
        assert!(matches!(
            load_split(&path, &SplitSpec::zero_shot(SplitMode::Test, 0)),
            Err(Error::DuplicateId { .. })
        ));
    }

    #[test]
    fn default_template_is_zero_shot_per_record() {
        let records = vec![
            record("a", "one?", Some("think"), "1"),
            record("b", "two?", Some("think"), "2"),
        ];
        let pairs =
            build_contrastive_pairs(&records, &PairTemplate::question_with_solution_vs_question())
                .unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].positive_prompt, "one?\nthink\n1");
        assert_eq!(pairs[0].negative_prompt, "one?");
        assert_eq!(pairs[0].pair_id, "a");
    }

    #[test]
    fn reasoning_required_by_template() {
        let records = vec![record("a", "one?", None, "1")];
        let err = build_contrastive_pairs(
            &records,
            &PairTemplate::question_with_solution_vs_question(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingReasoning { .. }));
    }

    #[test]
    fn prompt_contains_configured_exemplars() {
        let exemplars: Vec<DatasetRecord> = (0..5)
            .map(|i| record(&format!("ex{i}"), &format!("worked {i}?"), Some("steps"), "9"))
            .collect();
        let spec = SplitSpec {
            mode: SplitMode::Test,
            exemplars,
            seed: 1,
        };
        let r = record("q", "the question?", None, "1");
        let prompt = assemble_prompt(&r, &spec, "SYSTEM");
        assert_eq!(prompt.matches("worked").count(), 5);
        assert!(prompt.starts_with("SYSTEM\n\n"));
        assert!(prompt.ends_with("the question?"));
        // determinism
        assert_eq!(prompt, assemble_prompt(&r, &spec, "SYSTEM"));
    }

    #[test]
    fn zero_exemplars_is_system_plus_question() {
        let spec = SplitSpec::zero_shot(SplitMode::Train, 0);
        let r = record("q", "only question?", None, "1");
        assert_eq!(assemble_prompt(&r, &spec, "SYS"), "SYS\n\nonly question?");
    }

    #[test]
    fn score_three_of_four() {
        let records: Vec<DatasetRecord> = (0..4)
            .map(|i| record(&format!("r{i}"), "q", None, "5"))
            .collect();
        let outputs: Vec<ExampleOutput> = (0..4)
            .map(|i| ExampleOutput {
                example_id: format!("r{i}"),
                raw_output: String::new(),
                extracted: Some(if i == 0 { "6".into() } else { "5".into() }),
            })
            .collect();
        let report = score(&records, &outputs, meta()).unwrap();
        assert_eq!(report.correct, 3);
        assert!((report.accuracy - 0.75).abs() < 1e-12);
        assert_eq!(report.unparsed, 0);
    }

    #[test]
    fn all_no_answer_scores_zero() {
        let records: Vec<DatasetRecord> =
            (0..3).map(|i| record(&format!("r{i}"), "q", None, "5")).collect();
        let outputs: Vec<ExampleOutput> = (0..3)
            .map(|i| ExampleOutput {
                example_id: format!("r{i}"),
                raw_output: "noise".into(),
                extracted: None,
            })
            .collect();
        let report = score(&records, &outputs, meta()).unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.unparsed, 3);
    }

    #[test]
    fn score_is_replay_stable() {
        let records: Vec<DatasetRecord> =
            (0..4).map(|i| record(&format!("r{i}"), "q", None, "5")).collect();
        let outputs: Vec<ExampleOutput> = (0..4)
            .map(|i| ExampleOutput {
                example_id: format!("r{i}"),
                raw_output: format!("out {i}"),
                extracted: Some("5".into()),
            })
            .collect();
        let first = score(&records, &outputs, meta()).unwrap();
        let replayed: Vec<ExampleOutput> = first
            .records
            .iter()
            .map(|r| ExampleOutput {
                example_id: r.example_id.clone(),
                raw_output: r.raw_output.clone(),
                extracted: r.extracted.clone(),
            })
            .collect();
        let second = score(&records, &replayed, meta()).unwrap();
        assert_eq!(first.accuracy, second.accuracy);
        assert_eq!(first.records, second.records);
    }

    #[test]
    fn misaligned_ids_rejected() {
        let records = vec![record("a", "q", None, "1")];
        let outputs = vec![ExampleOutput {
            example_id: "b".into(),
            raw_output: String::new(),
            extracted: None,
        }];
        assert!(matches!(
            score(&records, &outputs, meta()),
            Err(Error::IdMismatch(_))
        ));
    }

    fn meta() -> ReportMeta {
        ReportMeta {
            dataset_id: "toy".into(),
            source_model_id: "src".into(),
            target_model_id: "tgt".into(),
            lambda: LambdaTag::Lambda(0.1),
            provenance: None,
        }
    }
}
