//! Minimal decoder-only transformer engine with per-layer activation capture
//! and additive steering injection on the residual stream.
//!
//! The engine is deliberately small: f32 weights, hand-rolled kernels, a KV
//! cache per generation session, and bit-reproducible greedy decoding. Its
//! job is to make the steering pipeline verifiable at desk scale, not to be
//! fast on large checkpoints.

mod model;
mod tokenizer;
mod toy;
mod weights_io;

pub use model::{GenerationOutput, LayerWeights, Model, Weights};
pub use tokenizer::{ByteTokenizer, Tokenizer};
pub use toy::{planted_chain_model, random_model, PlantedToy};
pub use weights_io::{load_model, save_model, SFWT_MAGIC, SFWT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture description for a loaded model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub head_dim: usize,
    pub vocab_size: usize,
    pub max_context: usize,
    pub norm_epsilon: f32,
}

impl ModelSpec {
    /// Feed-forward width is fixed by convention at 4x the hidden width.
    pub fn ffn_dim(&self) -> usize {
        4 * self.hidden_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 1 {
            return Err(Error::SpecInvariant("num_layers must be >= 1".into()));
        }
        if self.hidden_dim != self.num_heads * self.head_dim {
            return Err(Error::SpecInvariant(format!(
                "hidden_dim {} != num_heads {} x head_dim {}",
                self.hidden_dim, self.num_heads, self.head_dim
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::SpecInvariant("vocab_size must be >= 2".into()));
        }
        if self.max_context < 1 {
            return Err(Error::SpecInvariant("max_context must be >= 1".into()));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(Error::SpecInvariant("norm_epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// An ordered sequence of token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<u32>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.tokens
    }

    /// Check the sequence against a model: nonempty, every token in range,
    /// length within the context limit.
    pub fn validate_for(&self, spec: &ModelSpec) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::EmptyInput("token sequence".into()));
        }
        if self.tokens.len() > spec.max_context {
            return Err(Error::ContextOverflow {
                length: self.tokens.len(),
                max_context: spec.max_context,
            });
        }
        for &t in &self.tokens {
            if t as usize >= spec.vocab_size {
                return Err(Error::TokenOutOfRange {
                    token: t,
                    vocab_size: spec.vocab_size,
                });
            }
        }
        Ok(())
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(tokens: Vec<u32>) -> Self {
        Self::new(tokens)
    }
}

/// Per-layer last-token residual-stream states captured from a forward pass.
///
/// `layer_states[l]` is the residual-stream output of block `l` (after any
/// steering injection) at `position`; there is exactly one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layer_states: Vec<Vec<f32>>,
    pub position: usize,
}

impl ActivationTrace {
    pub fn num_layers(&self) -> usize {
        self.layer_states.len()
    }

    pub fn layer(&self, l: usize) -> Option<&[f32]> {
        self.layer_states.get(l).map(Vec::as_slice)
    }

    pub fn all_finite(&self) -> bool {
        self.layer_states
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Decoding controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: usize,
    /// 0 = greedy; > 0 samples with seeded inverse-CDF over softmax.
    pub temperature: f32,
    pub seed: u64,
    pub stop_sequences: Vec<String>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_new_tokens: 16,
            temperature: 0.0,
            seed: 0,
            stop_sequences: Vec::new(),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens < 1 {
            return Err(Error::InvalidParam("max_new_tokens must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidParam("temperature must be >= 0".into()));
        }
        Ok(())
    }
}
