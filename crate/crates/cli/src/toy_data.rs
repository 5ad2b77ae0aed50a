//! Toy dataset generation for `init-toy`: a planted-concept task whose
//! answer digit is controlled by the steering direction.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use steerage_core::harness::DatasetRecord;
use steerage_core::runtime::PlantedToy;

/// Deterministic toy records. Roughly every fifth record's gold answer is
/// the unsteered digit, the rest carry the concept-positive digit; questions
/// always end in `?` so prompts never end on a scaffold byte.
pub fn toy_records(split: &str, count: usize, offset: usize) -> Vec<DatasetRecord> {
    (0..count)
        .map(|i| {
            let k = offset + i;
            let answer = if k % 5 == 4 {
                PlantedToy::ANSWER_NEG
            } else {
                PlantedToy::ANSWER_POS
            };
            DatasetRecord {
                id: format!("toy-{split}-{i:03}"),
                question: format!("Probe {k}: does sample {k} carry the marker?"),
                reasoning: Some(format!("Sample {k} was tested against the marker.")),
                answer: answer.to_string(),
            }
        })
        .collect()
}

pub fn write_records(records: &[DatasetRecord], path: &Path) -> anyhow::Result<()> {
    let mut file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    for record in records {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}
