//! Forward pass, activation capture, and steered generation.
//!
//! Block layout (pre-norm):
//!
//! ```text
//! x   = tok_emb[token] + pos_emb[pos]
//! per layer l:
//!   x += Wo . attention(rmsnorm(x))        causal, KV-cached
//!   x += W_down . silu(W_up . rmsnorm(x))
//!   x += plan[l]                           only at the injected position
//!   capture[l] = x                         residual-stream output of block l
//! logits = lm_head . rmsnorm_final(x)
//! ```
//!
//! Steering is added to the residual-stream output of each block, at the most
//! recent position only: the last prompt token during prefill, then every
//! generated position. Injected contributions persist through the KV cache of
//! deeper layers, so steering carries through the rest of the generation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transfer::SteeringPlan;

use super::{ActivationTrace, GenerationParams, ModelSpec, TokenSequence, Tokenizer};

/// Weights of one transformer block. Matrices are row-major `[rows x cols]`
/// mapping an input of length `cols` to an output of length `rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub attn_norm: Vec<f32>, // [hidden]
    pub wq: Vec<f32>,        // [hidden x hidden]
    pub wk: Vec<f32>,        // [hidden x hidden]
    pub wv: Vec<f32>,        // [hidden x hidden]
    pub wo: Vec<f32>,        // [hidden x hidden]
    pub mlp_norm: Vec<f32>,  // [hidden]
    pub w_up: Vec<f32>,      // [ffn x hidden]
    pub w_down: Vec<f32>,    // [hidden x ffn]
}

/// Full weight set, immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub token_embedding: Vec<f32>,    // [vocab x hidden]
    pub position_embedding: Vec<f32>, // [max_context x hidden]
    pub layers: Vec<LayerWeights>,
    pub final_norm: Vec<f32>, // [hidden]
    pub lm_head: Vec<f32>,    // [vocab x hidden]
}

/// A loaded model: spec plus dimension-checked weights. `Model` is immutable
/// and `Send + Sync`; each generation owns its own decode state, so many
/// evaluations can share one model concurrently.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    weights: Weights,
}

/// Result of a steered generation.
#[derive(Debug, Clone)]
pub struct GenerationOutput {
    /// Decoded generated text (prompt excluded, stop sequence trimmed).
    pub text: String,
    /// Generated token ids (EOS excluded).
    pub token_ids: Vec<u32>,
    /// One trace per generated token: `step_traces[i]` is the capture at the
    /// position the i-th token was sampled from (`prompt_len - 1 + i`).
    pub step_traces: Vec<ActivationTrace>,
}

impl Model {
    pub fn new(spec: ModelSpec, weights: Weights) -> Result<Self> {
        spec.validate()?;
        check_weight_dims(&spec, &weights)?;
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Run the model over `input` and capture the residual-stream output of
    /// every layer at the final input position.
    ///
    /// Deterministic: identical inputs give bit-identical logits and traces.
    pub fn forward_with_capture(
        &self,
        input: &TokenSequence,
    ) -> Result<(Vec<f32>, ActivationTrace)> {
        input.validate_for(&self.spec)?;
        let tokens = input.as_slice();
        let mut state = DecodeState::new(self);
        for &t in &tokens[..tokens.len() - 1] {
            state.step(t, None, false)?;
        }
        let logits = state.step(tokens[tokens.len() - 1], None, true)?;
        let trace = state.take_trace();
        Ok((logits, trace))
    }

    /// Generate with per-layer additive steering.
    ///
    /// With an all-zero plan the output is token-for-token identical to
    /// unsteered generation. Greedy decoding (temperature 0) is a pure
    /// function of (weights, prompt, plan); temperature > 0 samples by
    /// inverse CDF over softmax with a ChaCha generator seeded from
    /// `params.seed`, so reruns reproduce exactly.
    pub fn generate_with_steering(
        &self,
        prompt: &TokenSequence,
        plan: &SteeringPlan,
        params: &GenerationParams,
        tokenizer: &dyn Tokenizer,
    ) -> Result<GenerationOutput> {
        prompt.validate_for(&self.spec)?;
        params.validate()?;
        plan.validate_for(&self.spec)?;

        let tokens = prompt.as_slice();
        let mut state = DecodeState::new(self);
        for &t in &tokens[..tokens.len() - 1] {
            state.step(t, None, false)?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut generated: Vec<u32> = Vec::new();
        let mut traces: Vec<ActivationTrace> = Vec::new();

        let mut logits = state.step(tokens[tokens.len() - 1], Some(plan), true)?;
        traces.push(state.take_trace());

        loop {
            let next = sample(&logits, params.temperature, &mut rng);
            if Some(next) == tokenizer.eos_id() {
                break;
            }
            generated.push(next);
            let text_so_far = tokenizer.decode(&generated);
            if let Some(stopped) = apply_stop_sequences(&text_so_far, &params.stop_sequences) {
                return Ok(GenerationOutput {
                    text: stopped,
                    token_ids: generated,
                    step_traces: traces,
                });
            }
            if generated.len() >= params.max_new_tokens {
                break;
            }
            // Context full: stop rather than error mid-generation.
            if state.len >= self.spec.max_context {
                break;
            }
            logits = state.step(next, Some(plan), true)?;
            traces.push(state.take_trace());
        }

        let text = tokenizer.decode(&generated);
        Ok(GenerationOutput {
            text,
            token_ids: generated,
            step_traces: traces,
        })
    }
}

fn check_weight_dims(spec: &ModelSpec, w: &Weights) -> Result<()> {
    let h = spec.hidden_dim;
    let f = spec.ffn_dim();
    let checks: Vec<(&str, usize, usize)> = vec![
        ("token_embedding", w.token_embedding.len(), spec.vocab_size * h),
        (
            "position_embedding",
            w.position_embedding.len(),
            spec.max_context * h,
        ),
        ("final_norm", w.final_norm.len(), h),
        ("lm_head", w.lm_head.len(), spec.vocab_size * h),
    ];
    for (name, got, want) in checks {
        if got != want {
            return Err(Error::DimensionMismatch {
                context: name.into(),
                expected: want,
                found: got,
            });
        }
    }
    if w.layers.len() != spec.num_layers {
        return Err(Error::DimensionMismatch {
            context: "layer count".into(),
            expected: spec.num_layers,
            found: w.layers.len(),
        });
    }
    for (l, lw) in w.layers.iter().enumerate() {
        let layer_checks: Vec<(&str, usize, usize)> = vec![
            ("attn_norm", lw.attn_norm.len(), h),
            ("wq", lw.wq.len(), h * h),
            ("wk", lw.wk.len(), h * h),
            ("wv", lw.wv.len(), h * h),
            ("wo", lw.wo.len(), h * h),
            ("mlp_norm", lw.mlp_norm.len(), h),
            ("w_up", lw.w_up.len(), f * h),
            ("w_down", lw.w_down.len(), h * f),
        ];
        for (name, got, want) in layer_checks {
            if got != want {
                return Err(Error::DimensionMismatch {
                    context: format!("layer {l} {name}"),
                    expected: want,
                    found: got,
                });
            }
        }
    }
    Ok(())
}

/// Mutable per-generation state: KV caches and scratch buffers. Single
/// threaded by contract; sessions over shared weights may run in parallel.
struct DecodeState<'m> {
    model: &'m Model,
    len: usize,
    k_cache: Vec<f32>, // [layers x max_context x hidden]
    v_cache: Vec<f32>,
    x: Vec<f32>,
    xb: Vec<f32>,
    xb2: Vec<f32>,
    q: Vec<f32>,
    att: Vec<f32>,
    ffn: Vec<f32>,
    captured: Vec<Vec<f32>>,
}

impl<'m> DecodeState<'m> {
    fn new(model: &'m Model) -> Self {
        let s = &model.spec;
        let h = s.hidden_dim;
        Self {
            model,
            len: 0,
            k_cache: vec![0.0; s.num_layers * s.max_context * h],
            v_cache: vec![0.0; s.num_layers * s.max_context * h],
            x: vec![0.0; h],
            xb: vec![0.0; h],
            xb2: vec![0.0; h],
            q: vec![0.0; h],
            att: vec![0.0; s.max_context],
            ffn: vec![0.0; s.ffn_dim()],
            captured: Vec::new(),
        }
    }

    /// Process one token at the next position. When `plan` is given, the
    /// planned vector for each layer is added to that layer's residual
    /// output at this position. When `capture` is set, per-layer states are
    /// stored for `take_trace`.
    fn step(&mut self, token: u32, plan: Option<&SteeringPlan>, capture: bool) -> Result<Vec<f32>> {
        let spec = &self.model.spec;
        let w = &self.model.weights;
        let h = spec.hidden_dim;
        let hd = spec.head_dim;
        let pos = self.len;
        if pos >= spec.max_context {
            return Err(Error::ContextOverflow {
                length: pos + 1,
                max_context: spec.max_context,
            });
        }

        let tok = token as usize;
        for i in 0..h {
            self.x[i] = w.token_embedding[tok * h + i] + w.position_embedding[pos * h + i];
        }
        if capture {
            self.captured.clear();
        }

        for (l, lw) in w.layers.iter().enumerate() {
            // attention
            rmsnorm(&mut self.xb, &self.x, &lw.attn_norm, spec.norm_epsilon);
            matvec(&mut self.q, &lw.wq, &self.xb, h, h);
            let cache_off = (l * spec.max_context + pos) * h;
            {
                let k_slot = &mut self.k_cache[cache_off..cache_off + h];
                matvec_into(k_slot, &lw.wk, &self.xb, h, h);
            }
            {
                let v_slot = &mut self.v_cache[cache_off..cache_off + h];
                matvec_into(v_slot, &lw.wv, &self.xb, h, h);
            }

            let scale = 1.0 / (hd as f32).sqrt();
            for head in 0..spec.num_heads {
                let qh = &self.q[head * hd..(head + 1) * hd];
                for t in 0..=pos {
                    let koff = (l * spec.max_context + t) * h + head * hd;
                    let kt = &self.k_cache[koff..koff + hd];
                    let mut score = 0.0f32;
                    for i in 0..hd {
                        score += qh[i] * kt[i];
                    }
                    self.att[t] = score * scale;
                }
                softmax(&mut self.att[..=pos]);
                let out = &mut self.xb2[head * hd..(head + 1) * hd];
                out.fill(0.0);
                for t in 0..=pos {
                    let voff = (l * spec.max_context + t) * h + head * hd;
                    let vt = &self.v_cache[voff..voff + hd];
                    let a = self.att[t];
                    for i in 0..hd {
                        out[i] += a * vt[i];
                    }
                }
            }
            matvec(&mut self.xb, &lw.wo, &self.xb2, h, h);
            for i in 0..h {
                self.x[i] += self.xb[i];
            }

            // feed-forward
            rmsnorm(&mut self.xb, &self.x, &lw.mlp_norm, spec.norm_epsilon);
            matvec(&mut self.ffn, &lw.w_up, &self.xb, spec.ffn_dim(), h);
            for v in self.ffn.iter_mut() {
                *v = silu(*v);
            }
            matvec(&mut self.xb, &lw.w_down, &self.ffn, h, spec.ffn_dim());
            for i in 0..h {
                self.x[i] += self.xb[i];
            }

            // steering injection at the current position
            if let Some(p) = plan {
                if let Some(vec) = p.vector_for(l) {
                    for i in 0..h {
                        self.x[i] += vec[i];
                    }
                }
            }

            if capture {
                self.captured.push(self.x.clone());
            }
        }

        rmsnorm(&mut self.xb, &self.x, &w.final_norm, spec.norm_epsilon);
        let mut logits = vec![0.0f32; spec.vocab_size];
        matvec(&mut logits, &w.lm_head, &self.xb, spec.vocab_size, h);

        self.len += 1;
        Ok(logits)
    }

    fn take_trace(&mut self) -> ActivationTrace {
        ActivationTrace {
            layer_states: std::mem::take(&mut self.captured),
            position: self.len - 1,
        }
    }
}

fn rmsnorm(out: &mut [f32], x: &[f32], gain: &[f32], eps: f32) {
    let mut ss = 0.0f32;
    for &v in x {
        ss += v * v;
    }
    let inv = 1.0 / (ss / x.len() as f32 + eps).sqrt();
    for i in 0..x.len() {
        out[i] = x[i] * inv * gain[i];
    }
}

fn matvec(out: &mut [f32], w: &[f32], x: &[f32], rows: usize, cols: usize) {
    matvec_into(&mut out[..rows], w, x, rows, cols);
}

fn matvec_into(out: &mut [f32], w: &[f32], x: &[f32], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0f32;
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        out[r] = acc;
    }
}

fn softmax(x: &mut [f32]) {
    let mut max = f32::NEG_INFINITY;
    for &v in x.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = 0.0f32;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

/// Greedy argmax with ties resolved toward the smallest token id.
fn argmax(logits: &[f32]) -> u32 {
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best as u32
}

/// Temperature 0 is greedy; otherwise inverse-CDF sampling over softmax,
/// fixed for cross-platform determinism.
fn sample(logits: &[f32], temperature: f32, rng: &mut ChaCha8Rng) -> u32 {
    if temperature == 0.0 {
        return argmax(logits);
    }
    let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let probs: Vec<f64> = logits
        .iter()
        .map(|&v| (f64::from((v - max) / temperature)).exp())
        .collect();
    let total: f64 = probs.iter().sum();
    let r: f64 = rng.gen::<f64>() * total;
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if r < cum {
            return i as u32;
        }
    }
    (logits.len() - 1) as u32
}

/// If `text` ends at or past a stop sequence, return it truncated before the
/// earliest stop occurrence.
fn apply_stop_sequences(text: &str, stops: &[String]) -> Option<String> {
    let mut cut: Option<usize> = None;
    for s in stops {
        if s.is_empty() {
            continue;
        }
        if let Some(idx) = text.find(s.as_str()) {
            cut = Some(cut.map_or(idx, |c| c.min(idx)));
        }
    }
    cut.map(|idx| text[..idx].to_string())
}
