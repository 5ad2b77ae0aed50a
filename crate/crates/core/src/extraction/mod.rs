//! Steering-vector extraction: contrastive prompt pairs -> per-layer
//! normalized hidden-state differences -> first principal component.

mod pca;
mod svec_io;

pub use pca::{first_principal_component, DENSE_EIGEN_MAX};
pub use svec_io::{read_steering_set, write_steering_set, SVEC_MAGIC, SVEC_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{ActivationTrace, Model, TokenSequence, Tokenizer};

/// A pair of prompts differing in the target concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastivePair {
    pub positive_prompt: String,
    pub negative_prompt: String,
    pub pair_id: String,
}

impl ContrastivePair {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>, id: impl Into<String>) -> Result<Self> {
        let positive_prompt = positive.into();
        let negative_prompt = negative.into();
        if positive_prompt.is_empty() || negative_prompt.is_empty() {
            return Err(Error::EmptyInput("contrastive prompt".into()));
        }
        if positive_prompt == negative_prompt {
            return Err(Error::InvalidParam(
                "positive and negative prompts must differ".into(),
            ));
        }
        Ok(Self {
            positive_prompt,
            negative_prompt,
            pair_id: id.into(),
        })
    }
}

/// Per-layer normalized differences of one trace pair. `None` marks a layer
/// where the pair was degenerate (difference norm below 1e-12).
#[derive(Debug, Clone, PartialEq)]
pub struct PairDifference {
    pub layer_diffs: Vec<Option<Vec<f32>>>,
}

impl PairDifference {
    pub fn num_layers(&self) -> usize {
        self.layer_diffs.len()
    }

    pub fn is_fully_degenerate(&self) -> bool {
        self.layer_diffs.iter().all(Option::is_none)
    }
}

/// How the sign ambiguity of PC1 was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SignConvention {
    /// Mean projection of the input differences onto the direction is >= 0.
    #[default]
    MeanProjectionNonNegative,
}

/// Per-layer unit-norm concept directions with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVectorSet {
    pub source_model_id: String,
    pub dataset_id: String,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub directions: Vec<Vec<f32>>,
    pub explained_variance: Vec<f32>,
    pub centered: bool,
    pub sign_convention: SignConvention,
    /// Per-layer count of pairs dropped as degenerate (informational; lives
    /// in the metadata sidecar, not the binary file).
    pub degenerate_pairs: Vec<u32>,
}

impl SteeringVectorSet {
    /// Identifier used in plan provenance and report files.
    pub fn set_id(&self) -> String {
        format!("{}:{}", self.source_model_id, self.dataset_id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.len() != self.num_layers
            || self.explained_variance.len() != self.num_layers
        {
            return Err(Error::DimensionMismatch {
                context: "steering set layer count".into(),
                expected: self.num_layers,
                found: self.directions.len(),
            });
        }
        for (l, dir) in self.directions.iter().enumerate() {
            if dir.len() != self.hidden_dim {
                return Err(Error::DimensionMismatch {
                    context: format!("direction for layer {l}"),
                    expected: self.hidden_dim,
                    found: dir.len(),
                });
            }
            let norm: f64 = dir.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParam(format!(
                    "direction for layer {l} has norm {norm}, expected 1"
                )));
            }
        }
        for (l, &ev) in self.explained_variance.iter().enumerate() {
            if !(0.0..=1.0).contains(&ev) {
                return Err(Error::InvalidParam(format!(
                    "explained_variance for layer {l} is {ev}, expected [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Options for [`extract_steering_set`].
#[derive(Debug, Clone)]
pub struct ExtractionOptions {
    pub dataset_id: String,
    pub centered: bool,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            dataset_id: "unknown".into(),
            centered: true,
        }
    }
}

/// Capture last-token traces for both prompts of every pair, in input order.
/// Runtime errors are annotated with the offending pair id.
pub fn collect_pair_traces(
    model: &Model,
    tokenizer: &dyn Tokenizer,
    pairs: &[ContrastivePair],
) -> Result<Vec<(ActivationTrace, ActivationTrace)>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("contrastive pairs".into()));
    }
    let mut out = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let run = |text: &str| -> Result<ActivationTrace> {
            let tokens = TokenSequence::new(tokenizer.encode(text));
            let (_, trace) = model.forward_with_capture(&tokens)?;
            Ok(trace)
        };
        let pos = run(&pair.positive_prompt).map_err(|e| Error::for_pair(&pair.pair_id, e))?;
        let neg = run(&pair.negative_prompt).map_err(|e| Error::for_pair(&pair.pair_id, e))?;
        out.push((pos, neg));
    }
    Ok(out)
}

/// Per-layer `(a - b) / ||a - b||`; layers where the norm falls below 1e-12
/// are marked degenerate.
pub fn normalized_difference(a: &ActivationTrace, b: &ActivationTrace) -> Result<PairDifference> {
    if a.num_layers() != b.num_layers() {
        return Err(Error::DimensionMismatch {
            context: "trace layer count".into(),
            expected: a.num_layers(),
            found: b.num_layers(),
        });
    }
    let mut layer_diffs = Vec::with_capacity(a.num_layers());
    for (la, lb) in a.layer_states.iter().zip(&b.layer_states) {
        if la.len() != lb.len() {
            return Err(Error::DimensionMismatch {
                context: "trace hidden width".into(),
                expected: la.len(),
                found: lb.len(),
            });
        }
        let diff: Vec<f64> = la
            .iter()
            .zip(lb)
            .map(|(&x, &y)| f64::from(x) - f64::from(y))
            .collect();
        let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            layer_diffs.push(None);
        } else {
            layer_diffs.push(Some(diff.iter().map(|&v| (v / norm) as f32).collect()));
        }
    }
    Ok(PairDifference { layer_diffs })
}

/// Build a steering set from already-captured trace pairs. Degenerate pairs
/// are dropped per layer; each layer needs at least 2 usable differences.
pub fn build_from_trace_pairs(
    trace_pairs: &[(ActivationTrace, ActivationTrace)],
    source_model_id: &str,
    hidden_dim: usize,
    opts: &ExtractionOptions,
) -> Result<SteeringVectorSet> {
    if trace_pairs.is_empty() {
        return Err(Error::EmptyInput("trace pairs".into()));
    }
    let num_layers = trace_pairs[0].0.num_layers();
    let mut per_layer: Vec<Vec<Vec<f32>>> = vec![Vec::new(); num_layers];
    let mut degenerate = vec![0u32; num_layers];

    for (i, (a, b)) in trace_pairs.iter().enumerate() {
        let diff = normalized_difference(a, b)?;
        if diff.num_layers() != num_layers {
            return Err(Error::DimensionMismatch {
                context: format!("trace pair {i} layer count"),
                expected: num_layers,
                found: diff.num_layers(),
            });
        }
        if diff.is_fully_degenerate() {
            log::warn!("trace pair {i} is degenerate at every layer; skipped");
        }
        for (l, d) in diff.layer_diffs.into_iter().enumerate() {
            match d {
                Some(v) => per_layer[l].push(v),
                None => degenerate[l] += 1,
            }
        }
    }

    let mut directions = Vec::with_capacity(num_layers);
    let mut explained_variance = Vec::with_capacity(num_layers);
    for (l, diffs) in per_layer.iter().enumerate() {
        if diffs.len() < 2 {
            return Err(Error::InsufficientPairs {
                layer: l,
                usable: diffs.len(),
                required: 2,
            });
        }
        let (dir, ev) = first_principal_component(diffs, opts.centered)?;
        directions.push(dir);
        explained_variance.push(ev as f32);
    }

    let set = SteeringVectorSet {
        source_model_id: source_model_id.to_string(),
        dataset_id: opts.dataset_id.clone(),
        num_layers,
        hidden_dim,
        directions,
        explained_variance,
        centered: opts.centered,
        sign_convention: SignConvention::MeanProjectionNonNegative,
        degenerate_pairs: degenerate,
    };
    set.validate()?;
    Ok(set)
}

/// Full extraction: run the pairs through the model and distill one unit
/// direction per layer.
pub fn extract_steering_set(
    model: &Model,
    tokenizer: &dyn Tokenizer,
    pairs: &[ContrastivePair],
    opts: &ExtractionOptions,
) -> Result<SteeringVectorSet> {
    let traces = collect_pair_traces(model, tokenizer, pairs)?;
    build_from_trace_pairs(
        &traces,
        &model.spec().model_id,
        model.spec().hidden_dim,
        opts,
    )
}
