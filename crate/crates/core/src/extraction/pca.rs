//! First principal component of a set of difference vectors.
//!
//! Dense symmetric eigendecomposition of the d x d covariance up to
//! `DENSE_EIGEN_MAX` dims; power iteration (tolerance 1e-10, at most 10,000
//! iterations) beyond that. All internal math is f64; the returned direction
//! is rounded to f32 at the boundary.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Widths at or below this use the dense eigensolver.
pub const DENSE_EIGEN_MAX: usize = 512;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

/// Direction of maximal variance among `diffs`, with the fraction of total
/// variance it explains.
///
/// With `centered` the vectors are mean-centered first (standard PCA);
/// uncentered PCA diagonalizes the raw second moment instead, which is the
/// mode that recovers a constant planted offset.
///
/// The sign is fixed so the mean projection of the (uncentered) input
/// vectors onto the direction is >= 0; an exactly-zero mean projection
/// falls back to making the first nonzero component positive.
pub fn first_principal_component(diffs: &[Vec<f32>], centered: bool) -> Result<(Vec<f32>, f64)> {
    if diffs.len() < 2 {
        return Err(Error::InvalidParam(format!(
            "need at least 2 difference vectors for PCA, got {}",
            diffs.len()
        )));
    }
    let d = diffs[0].len();
    if d == 0 {
        return Err(Error::EmptyInput("difference vectors".into()));
    }
    for (i, v) in diffs.iter().enumerate() {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                context: format!("difference vector {i}"),
                expected: d,
                found: v.len(),
            });
        }
    }

    let n = diffs.len();
    let data: Vec<Vec<f64>> = diffs
        .iter()
        .map(|v| v.iter().map(|&x| f64::from(x)).collect())
        .collect();
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();

    // covariance (or raw second moment when uncentered)
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for row in &data {
        for i in 0..d {
            let xi = if centered { row[i] - mean[i] } else { row[i] };
            for j in i..d {
                let xj = if centered { row[j] - mean[j] } else { row[j] };
                cov[(i, j)] += xi * xj;
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[(i, j)] /= n as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }

    let trace: f64 = (0..d).map(|i| cov[(i, i)]).sum();
    if trace <= 1e-24 {
        return Err(Error::ZeroVariance);
    }

    let (mut direction, top_eigenvalue) = if d <= DENSE_EIGEN_MAX {
        dense_top_eigenpair(&cov)
    } else {
        power_iteration(&cov)
    };

    let norm = direction.norm();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVariance);
    }
    direction /= norm;

    // sign convention: mean projection of the inputs onto the direction >= 0
    let mean_proj: f64 = (0..d).map(|i| mean[i] * direction[i]).sum();
    if mean_proj < 0.0 {
        direction = -direction;
    } else if mean_proj == 0.0 {
        if let Some(first) = direction.iter().find(|v| **v != 0.0) {
            if *first < 0.0 {
                direction = -direction;
            }
        }
    }

    let explained = (top_eigenvalue / trace).clamp(0.0, 1.0);
    Ok((direction.iter().map(|&v| v as f32).collect(), explained))
}

fn dense_top_eigenpair(cov: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let eigen = cov.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eigen.eigenvalues.len() {
        if eigen.eigenvalues[i] > eigen.eigenvalues[best] {
            best = i;
        }
    }
    (
        eigen.eigenvectors.column(best).into_owned(),
        eigen.eigenvalues[best],
    )
}

/// Deterministic power iteration on the covariance. The start vector comes
/// from a fixed-seed ChaCha stream, so the result is platform-independent.
fn power_iteration(cov: &DMatrix<f64>) -> (DVector<f64>, f64) {
    let d = cov.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5645_4331);
    let mut v = DVector::<f64>::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
    v /= v.norm();
    let mut eigenvalue = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = cov * &v;
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        let next = w / norm;
        eigenvalue = norm;
        let delta = (&next - &v).norm().min((&next + &v).norm());
        v = next;
        if delta < POWER_TOL {
            break;
        }
    }
    (v, eigenvalue)
}
