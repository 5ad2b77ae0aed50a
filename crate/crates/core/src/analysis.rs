//! Geometric alignment between steering-vector sets: layerwise Pearson or
//! cosine similarity, exported as heatmap-ready tabular data.
//!
//! The module reports, it does not judge: low correlation between two real
//! models' sets is a finding, not an invariant.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::SteeringVectorSet;
use crate::transfer::DimensionAdapter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Pearson,
    Cosine,
}

/// L_row x L_col grid of similarity values in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMatrix {
    pub row_model_id: String,
    pub col_model_id: String,
    pub entries: Vec<Vec<f64>>,
    pub measure: Measure,
    /// True when the column set was passed through a dimension adapter.
    pub adapted: bool,
}

/// Standard Pearson correlation coefficient. Errors on length mismatch,
/// fewer than 2 components, or zero variance on either side.
pub fn pearson(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "pearson inputs".into(),
            expected: u.len(),
            found: v.len(),
        });
    }
    if u.len() < 2 {
        return Err(Error::InvalidParam(
            "pearson needs vectors of length >= 2".into(),
        ));
    }
    let n = u.len() as f64;
    let mean_u = u.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let mean_v = v.iter().map(|&x| f64::from(x)).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_u = 0.0;
    let mut var_v = 0.0;
    for (&x, &y) in u.iter().zip(v) {
        let dx = f64::from(x) - mean_u;
        let dy = f64::from(y) - mean_v;
        cov += dx * dy;
        var_u += dx * dx;
        var_v += dy * dy;
    }
    if var_u == 0.0 || var_v == 0.0 {
        return Err(Error::ZeroVarianceInput);
    }
    Ok((cov / (var_u.sqrt() * var_v.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine similarity. Errors on length mismatch or a zero vector.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine inputs".into(),
            expected: u.len(),
            found: v.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut nu = 0.0f64;
    let mut nv = 0.0f64;
    for (&x, &y) in u.iter().zip(v) {
        dot += f64::from(x) * f64::from(y);
        nu += f64::from(x) * f64::from(x);
        nv += f64::from(y) * f64::from(y);
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVarianceInput);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Entry (i, j) = measure(a.directions[i], b.directions[j]). Requires equal
/// widths, or an adapter mapping b's width onto a's.
pub fn alignment_matrix(
    a: &SteeringVectorSet,
    b: &SteeringVectorSet,
    measure: Measure,
    adapter: Option<&DimensionAdapter>,
) -> Result<AlignmentMatrix> {
    let (b_dirs, adapted): (Vec<Vec<f32>>, bool) = match adapter {
        None => {
            if a.hidden_dim != b.hidden_dim {
                return Err(Error::DimensionMismatch {
                    context: "alignment widths (supply a dimension adapter)".into(),
                    expected: a.hidden_dim,
                    found: b.hidden_dim,
                });
            }
            (b.directions.clone(), false)
        }
        Some(ad) => {
            if ad.source_dim != b.hidden_dim || ad.target_dim != a.hidden_dim {
                return Err(Error::DimensionMismatch {
                    context: "alignment adapter widths".into(),
                    expected: b.hidden_dim,
                    found: ad.source_dim,
                });
            }
            let mapped = b
                .directions
                .iter()
                .map(|d| ad.adapt(d))
                .collect::<Result<Vec<_>>>()?;
            (mapped, true)
        }
    };

    let f = match measure {
        Measure::Pearson => pearson,
        Measure::Cosine => cosine,
    };
    let mut entries = Vec::with_capacity(a.num_layers);
    for da in &a.directions {
        let mut row = Vec::with_capacity(b_dirs.len());
        for db in &b_dirs {
            row.push(f(da, db)?);
        }
        entries.push(row);
    }
    Ok(AlignmentMatrix {
        row_model_id: a.source_model_id.clone(),
        col_model_id: b.source_model_id.clone(),
        entries,
        measure,
        adapted,
    })
}

/// Pearson correlation of the two sets' per-layer explained-variance
/// profiles (the series-level alternative to vector-level alignment).
pub fn explained_variance_correlation(
    a: &SteeringVectorSet,
    b: &SteeringVectorSet,
) -> Result<f64> {
    if a.num_layers != b.num_layers {
        return Err(Error::DimensionMismatch {
            context: "explained-variance profiles".into(),
            expected: a.num_layers,
            found: b.num_layers,
        });
    }
    pearson(&a.explained_variance, &b.explained_variance)
}

/// Comma-separated grid with a header row and column of layer indices. An
/// L_row x L_col matrix becomes an (L_row + 1) x (L_col + 1) file.
pub fn export_heatmap_data(m: &AlignmentMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("layer");
    for j in 0..m.entries.first().map_or(0, Vec::len) {
        out.push_str(&format!(",{j}"));
    }
    out.push('\n');
    for (i, row) in m.entries.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Re-import a heatmap grid. Values round-trip losslessly: the exporter
/// prints shortest-round-trip decimal forms.
pub fn import_heatmap_data(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        path: path.into(),
        detail: "empty heatmap file".into(),
    })?;
    if !header.starts_with("layer") {
        return Err(Error::Parse {
            path: path.into(),
            detail: "missing `layer` header row".into(),
        });
    }
    let cols = header.split(',').count() - 1;
    let mut entries = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let row_label = fields.next().unwrap_or_default();
        if row_label.parse::<usize>() != Ok(idx) {
            return Err(Error::Parse {
                path: path.into(),
                detail: format!("row {idx}: bad row label {row_label:?}"),
            });
        }
        let row: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.into(),
                    detail: format!("row {idx}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse {
                path: path.into(),
                detail: format!("row {idx}: expected {cols} values, got {}", row.len()),
            });
        }
        entries.push(row);
    }
    Ok(entries)
}
