//! Cross-model transfer: greedy n->n layer mapping, explicit dimension
//! adaptation, and lambda-scaled steering plans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::SteeringVectorSet;
use crate::runtime::ModelSpec;

/// Greedy layer pairing between a source and a target model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMapping {
    /// `(source_layer, target_layer)` pairs; always the identity prefix.
    pub pairs: Vec<(usize, usize)>,
    /// Target layers beyond the shared prefix; they receive zero vectors.
    pub unmapped_target_layers: Vec<usize>,
}

impl LayerMapping {
    pub fn summary(&self) -> String {
        format!(
            "n->n over first {} layers, {} unmapped target layers",
            self.pairs.len(),
            self.unmapped_target_layers.len()
        )
    }
}

/// Pair source layer i with target layer i for `i < min(L_s, L_t)`; list the
/// remaining target layers as unmapped. Total over all positive counts.
pub fn map_layers(source_layers: usize, target_layers: usize) -> LayerMapping {
    let shared = source_layers.min(target_layers);
    LayerMapping {
        pairs: (0..shared).map(|i| (i, i)).collect(),
        unmapped_target_layers: (shared..target_layers).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Identity,
    TruncateOrPad,
    SeededProjection,
}

/// Explicit rule reshaping a source-width vector to the target's hidden
/// width. Width mismatches are never reinterpreted silently: callers must
/// pick an adapter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionAdapter {
    pub kind: AdapterKind,
    /// Only meaningful for [`AdapterKind::SeededProjection`].
    pub seed: u64,
    pub source_dim: usize,
    pub target_dim: usize,
}

impl DimensionAdapter {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: AdapterKind::Identity,
            seed: 0,
            source_dim: dim,
            target_dim: dim,
        }
    }

    pub fn truncate_or_pad(source_dim: usize, target_dim: usize) -> Self {
        Self {
            kind: AdapterKind::TruncateOrPad,
            seed: 0,
            source_dim,
            target_dim,
        }
    }

    /// Seeded-deterministic projection with orthonormal rows. Orthonormal
    /// rows require `target_dim <= source_dim` (the large-to-small transfer
    /// direction); when the target is wider the columns are orthonormalized
    /// instead, making the map an isometry.
    pub fn seeded_projection(source_dim: usize, target_dim: usize, seed: u64) -> Self {
        Self {
            kind: AdapterKind::SeededProjection,
            seed,
            source_dim,
            target_dim,
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            AdapterKind::Identity => format!("identity({})", self.source_dim),
            AdapterKind::TruncateOrPad => {
                format!("truncate_or_pad({}->{})", self.source_dim, self.target_dim)
            }
            AdapterKind::SeededProjection => format!(
                "seeded_projection({}->{}, seed={})",
                self.source_dim, self.target_dim, self.seed
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_dim == 0 || self.target_dim == 0 {
            return Err(Error::InvalidParam("adapter dims must be nonzero".into()));
        }
        if self.kind == AdapterKind::Identity && self.source_dim != self.target_dim {
            return Err(Error::DimensionMismatch {
                context: "identity adapter".into(),
                expected: self.source_dim,
                found: self.target_dim,
            });
        }
        Ok(())
    }

    /// Adapt one vector. Non-identity adapters re-normalize to unit norm so
    /// the "lambda = vector norm" semantics survive the width change.
    pub fn adapt(&self, v: &[f32]) -> Result<Vec<f32>> {
        self.validate()?;
        if v.len() != self.source_dim {
            return Err(Error::DimensionMismatch {
                context: "adapter input".into(),
                expected: self.source_dim,
                found: v.len(),
            });
        }
        match self.kind {
            AdapterKind::Identity => Ok(v.to_vec()),
            AdapterKind::TruncateOrPad => {
                let mut out: Vec<f64> = v
                    .iter()
                    .take(self.target_dim)
                    .map(|&x| f64::from(x))
                    .collect();
                out.resize(self.target_dim, 0.0);
                renormalize(&mut out).ok_or_else(|| {
                    Error::InvalidParam(
                        "truncation produced the zero vector; no direction survives".into(),
                    )
                })?;
                Ok(out.iter().map(|&x| x as f32).collect())
            }
            AdapterKind::SeededProjection => {
                let m = projection_matrix(self.source_dim, self.target_dim, self.seed)?;
                let mut out = vec![0.0f64; self.target_dim];
                for r in 0..self.target_dim {
                    let row = &m[r * self.source_dim..(r + 1) * self.source_dim];
                    out[r] = row
                        .iter()
                        .zip(v)
                        .map(|(&w, &x)| w * f64::from(x))
                        .sum::<f64>();
                }
                renormalize(&mut out).ok_or_else(|| {
                    Error::InvalidParam("projection produced the zero vector".into())
                })?;
                Ok(out.iter().map(|&x| x as f32).collect())
            }
        }
    }
}

fn renormalize(v: &mut [f64]) -> Option<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Some(())
}

/// Seeded Gaussian matrix `[target_dim x source_dim]`, Gram-Schmidt
/// orthonormalized along the shorter side. Pure function of (seed, dims).
fn projection_matrix(source_dim: usize, target_dim: usize, seed: u64) -> Result<Vec<f64>> {
    use rand_chacha::rand_core::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let mut m: Vec<f64> = (0..target_dim * source_dim)
        .map(|_| normal.sample(&mut rng))
        .collect();

    if target_dim <= source_dim {
        gram_schmidt_rows(&mut m, target_dim, source_dim)?;
    } else {
        // orthonormal columns: transpose, orthonormalize, transpose back
        let mut t = vec![0.0f64; source_dim * target_dim];
        for r in 0..target_dim {
            for c in 0..source_dim {
                t[c * target_dim + r] = m[r * source_dim + c];
            }
        }
        gram_schmidt_rows(&mut t, source_dim, target_dim)?;
        for r in 0..target_dim {
            for c in 0..source_dim {
                m[r * source_dim + c] = t[c * target_dim + r];
            }
        }
    }
    Ok(m)
}

fn gram_schmidt_rows(m: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    for r in 0..rows {
        for prev in 0..r {
            let dot: f64 = (0..cols)
                .map(|c| m[r * cols + c] * m[prev * cols + c])
                .sum();
            for c in 0..cols {
                m[r * cols + c] -= dot * m[prev * cols + c];
            }
        }
        let norm: f64 = (0..cols).map(|c| m[r * cols + c].powi(2)).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return Err(Error::InvalidParam(
                "projection matrix became rank-deficient during orthonormalization".into(),
            ));
        }
        for c in 0..cols {
            m[r * cols + c] /= norm;
        }
    }
    Ok(())
}

/// Where a plan came from, embedded in results files so every reported
/// number is traceable to (steering set, adapter, lambda).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanProvenance {
    pub steering_set_id: String,
    pub adapter: String,
    pub mapping: String,
    pub lambda: f64,
}

/// Per-target-layer scaled vectors to inject during generation. Covers
/// every target layer; unmapped layers hold the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPlan {
    pub layer_vectors: Vec<Vec<f32>>,
    pub lambda: f64,
    pub provenance: PlanProvenance,
}

impl SteeringPlan {
    /// All-zero plan for a model (the lambda = 0 identity).
    pub fn zero(spec: &ModelSpec) -> Self {
        Self {
            layer_vectors: vec![vec![0.0; spec.hidden_dim]; spec.num_layers],
            lambda: 0.0,
            provenance: PlanProvenance {
                steering_set_id: "none".into(),
                adapter: "none".into(),
                mapping: "zero plan".into(),
                lambda: 0.0,
            },
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_vectors.len()
    }

    pub fn vector_for(&self, layer: usize) -> Option<&[f32]> {
        self.layer_vectors.get(layer).map(Vec::as_slice)
    }

    pub fn validate_for(&self, spec: &ModelSpec) -> Result<()> {
        if self.layer_vectors.len() != spec.num_layers {
            return Err(Error::LayerOutOfRange {
                layer: self.layer_vectors.len().saturating_sub(1),
                num_layers: spec.num_layers,
            });
        }
        for (l, v) in self.layer_vectors.iter().enumerate() {
            if v.len() != spec.hidden_dim {
                return Err(Error::DimensionMismatch {
                    context: format!("plan vector for layer {l}"),
                    expected: spec.hidden_dim,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// Assemble a steering plan: map layers greedily, adapt each mapped source
/// direction to the target width, scale by lambda, and zero-fill the rest.
/// Each mapped layer's vector ends up with L2 norm lambda (within 1e-5).
pub fn build_plan(
    set: &SteeringVectorSet,
    target_spec: &ModelSpec,
    lambda: f64,
    adapter: &DimensionAdapter,
) -> Result<SteeringPlan> {
    if lambda < 0.0 {
        return Err(Error::InvalidParam(format!("lambda must be >= 0, got {lambda}")));
    }
    adapter.validate()?;
    if adapter.source_dim != set.hidden_dim {
        return Err(Error::DimensionMismatch {
            context: "adapter source width vs steering set".into(),
            expected: set.hidden_dim,
            found: adapter.source_dim,
        });
    }
    if adapter.target_dim != target_spec.hidden_dim {
        return Err(Error::DimensionMismatch {
            context: "adapter target width vs target model".into(),
            expected: target_spec.hidden_dim,
            found: adapter.target_dim,
        });
    }

    let mapping = map_layers(set.num_layers, target_spec.num_layers);
    let mut layer_vectors = vec![vec![0.0f32; target_spec.hidden_dim]; target_spec.num_layers];
    for &(src, tgt) in &mapping.pairs {
        let adapted = adapter.adapt(&set.directions[src])?;
        layer_vectors[tgt] = adapted.iter().map(|&v| (f64::from(v) * lambda) as f32).collect();
    }

    Ok(SteeringPlan {
        layer_vectors,
        lambda,
        provenance: PlanProvenance {
            steering_set_id: set.set_id(),
            adapter: adapter.describe(),
            mapping: mapping.summary(),
            lambda,
        },
    })
}
