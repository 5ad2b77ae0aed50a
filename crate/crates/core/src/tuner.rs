//! Lambda tuning: sweep a grid on a validation split, score each lambda,
//! pick the argmax with deterministic smallest-lambda tie-breaking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::SteeringVectorSet;
use crate::harness::{evaluate, EvalReport, EvalSetup};
use crate::harness::DatasetRecord;
use crate::parallel::run_indexed;
use crate::runtime::{Model, Tokenizer};
use crate::transfer::{build_plan, DimensionAdapter};

/// Ordered, duplicate-free lambda values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    /// The default grid: {0.01..0.09 step 0.01} then {0.1..1.0 step 0.1},
    /// 19 values. Written as literals so the values are exact decimals.
    pub fn default_grid() -> Self {
        Self {
            values: vec![
                0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, //
                0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
            ],
        }
    }

    /// A custom grid: nonempty, nonnegative, strictly increasing.
    pub fn custom(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("lambda grid".into()));
        }
        for w in values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParam(format!(
                    "grid must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if values[0] < 0.0 {
            return Err(Error::InvalidParam("grid values must be >= 0".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub lambda: f64,
    pub accuracy: f64,
    pub report: EvalReport,
}

/// Full sweep outcome. `lambda_best` maximizes accuracy over the grid;
/// ties break toward the smallest lambda. A separate baseline run is always
/// recorded (the grid itself excludes lambda = 0).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub lambda_best: f64,
    pub baseline: EvalReport,
}

impl SweepResult {
    pub fn best_accuracy(&self) -> f64 {
        self.rows
            .iter()
            .find(|r| r.lambda == self.lambda_best)
            .map(|r| r.accuracy)
            .unwrap_or(0.0)
    }
}

/// Evaluate every lambda in the grid on `records` with identical prompts and
/// parameters. Lambda points run independently (up to `workers` at a time);
/// assembly is keyed by grid order, so the result does not depend on
/// scheduling.
pub fn sweep(
    model: &Model,
    tokenizer: &dyn Tokenizer,
    set: &SteeringVectorSet,
    adapter: &DimensionAdapter,
    records: &[DatasetRecord],
    grid: &LambdaGrid,
    setup: &EvalSetup,
    workers: usize,
) -> Result<SweepResult> {
    if records.is_empty() {
        return Err(Error::EmptyInput("validation split".into()));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid".into()));
    }

    let baseline = evaluate(model, tokenizer, None, records, setup)?;

    let values = grid.values();
    let rows: Vec<SweepRow> = run_indexed(values.len(), workers, |i| {
        let lambda = values[i];
        let plan = build_plan(set, model.spec(), lambda, adapter)?;
        let report = evaluate(model, tokenizer, Some(&plan), records, setup)?;
        Ok(SweepRow {
            lambda,
            accuracy: report.accuracy,
            report,
        })
    })?;

    let mut best = 0usize;
    for i in 1..rows.len() {
        if rows[i].accuracy > rows[best].accuracy {
            best = i;
        }
    }
    Ok(SweepResult {
        lambda_best: rows[best].lambda,
        rows,
        baseline,
    })
}

/// Argmax over recorded (lambda, metric) pairs with the same tie rule as
/// [`sweep`]; exposed so persisted curves can be re-checked.
pub fn argmax_lambda(curve: &[(f64, f64)]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &(lambda, metric) in curve {
        best = match best {
            None => Some((lambda, metric)),
            Some((bl, bm)) => {
                if metric > bm || (metric == bm && lambda < bl) {
                    Some((lambda, metric))
                } else {
                    Some((bl, bm))
                }
            }
        };
    }
    best.map(|(l, _)| l)
}
