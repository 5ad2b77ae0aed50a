//! Report files: a JSON summary header line followed by one JSON line per
//! evaluated example. File names encode (source model, target model,
//! dataset, lambda | ITS | baseline).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::PlanProvenance;

use super::{EvalRecord, EvalReport, LambdaTag};

#[derive(Debug, Serialize, Deserialize)]
struct ReportHeader {
    dataset_id: String,
    source_model_id: String,
    target_model_id: String,
    lambda: LambdaTag,
    accuracy: f64,
    total: usize,
    correct: usize,
    unparsed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<PlanProvenance>,
}

/// Replace path-hostile characters in a model or dataset id.
pub fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// `<source>__<target>__<dataset>__<label>.report.jsonl`
pub fn report_file_name(report: &EvalReport) -> String {
    format!(
        "{}__{}__{}__{}.report.jsonl",
        sanitize_id(&report.source_model_id),
        sanitize_id(&report.target_model_id),
        sanitize_id(&report.dataset_id),
        sanitize_id(&report.lambda.label()),
    )
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let header = ReportHeader {
        dataset_id: report.dataset_id.clone(),
        source_model_id: report.source_model_id.clone(),
        target_model_id: report.target_model_id.clone(),
        lambda: report.lambda,
        accuracy: report.accuracy,
        total: report.total,
        correct: report.correct,
        unparsed: report.unparsed,
        provenance: report.provenance.clone(),
    };
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| Error::InvalidParam(format!("report header serialization: {e}")))?;
    out.push(b'\n');
    for record in &report.records {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| Error::InvalidParam(format!("report record serialization: {e}")))?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
        path: path.into(),
        detail: "empty report file".into(),
    })?;
    let header: ReportHeader = serde_json::from_str(header_line).map_err(|e| Error::Parse {
        path: path.into(),
        detail: format!("header: {e}"),
    })?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.into(),
            detail: format!("line {}: {e}", idx + 1),
        })?;
        records.push(record);
    }
    if records.len() != header.total {
        return Err(Error::Parse {
            path: path.into(),
            detail: format!(
                "header says {} records, file has {}",
                header.total,
                records.len()
            ),
        });
    }
    Ok(EvalReport {
        dataset_id: header.dataset_id,
        source_model_id: header.source_model_id,
        target_model_id: header.target_model_id,
        lambda: header.lambda,
        accuracy: header.accuracy,
        total: header.total,
        correct: header.correct,
        unparsed: header.unparsed,
        records,
        provenance: header.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> EvalReport {
        EvalReport {
            dataset_id: "toy".into(),
            source_model_id: "org/source".into(),
            target_model_id: "tgt".into(),
            lambda: LambdaTag::Lambda(0.6),
            accuracy: 0.5,
            total: 2,
            correct: 1,
            unparsed: 0,
            records: vec![
                EvalRecord {
                    example_id: "a".into(),
                    lambda: 0.6,
                    raw_output: "\\boxed{7}".into(),
                    extracted: Some("7".into()),
                    correct: true,
                },
                EvalRecord {
                    example_id: "b".into(),
                    lambda: 0.6,
                    raw_output: "\\boxed{3}".into(),
                    extracted: Some("3".into()),
                    correct: false,
                },
            ],
            provenance: Some(PlanProvenance {
                steering_set_id: "org/source:toy".into(),
                adapter: "identity(16)".into(),
                mapping: "n->n over first 4 layers, 0 unmapped target layers".into(),
                lambda: 0.6,
            }),
        }
    }

    #[test]
    fn report_round_trip() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(report_file_name(&report));
        write_report(&report, &path).unwrap();
        let loaded = read_report(&path).unwrap();
        assert_eq!(loaded, report);
    }

    #[test]
    fn file_name_encodes_everything_and_is_safe() {
        let report = sample_report();
        let name = report_file_name(&report);
        assert_eq!(name, "org-source__tgt__toy__lambda-0.6.report.jsonl");
    }

    #[test]
    fn malformed_header_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.report.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(read_report(&path), Err(Error::Parse { .. })));
    }
}
