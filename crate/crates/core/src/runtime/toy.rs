//! Toy model builders: seeded random models for property tests and the
//! hand-specified "planted chain" models used by the end-to-end toy task.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ByteTokenizer, LayerWeights, Model, ModelSpec, Weights};

/// Layout constants of the planted chain models.
///
/// The model is a byte-level successor machine: with zero attention/MLP
/// blocks the residual stream is just the token embedding, and the lm head
/// maps each chain byte's embedding slot to the logit of its successor. Any
/// non-chain byte starts the chain, so every prompt is answered with
/// `\boxed{<digit>}` followed by EOS.
///
/// One hidden coordinate (`CONCEPT_SLOT`) is reserved as the concept
/// channel: the embeddings of the two answer digits carry +/- that
/// coordinate, and the lm head decides between the digits on it. Unsteered,
/// the digit logits tie and greedy decoding picks the smaller byte
/// (`ANSWER_NEG`). Adding a steering vector with a positive concept
/// component flips the answer to `ANSWER_POS`; pushing it far enough
/// derails the chain, so accuracy degrades at large steering intensity.
pub struct PlantedToy;

impl PlantedToy {
    pub const HIDDEN_DIM: usize = 16;
    pub const NUM_HEADS: usize = 4;
    /// Hidden coordinate reserved for the planted concept.
    pub const CONCEPT_SLOT: usize = 7;
    /// Answer byte favoured by positive steering.
    pub const ANSWER_POS: char = '7';
    /// Answer byte produced unsteered (tie resolved to the smaller byte).
    pub const ANSWER_NEG: char = '3';

    /// The emitted scaffold around the answer digit.
    pub const CHAIN: &'static str = "\\boxed{";

    const DEFAULT_SLOT: usize = 15;
    const CLOSE_SLOT: usize = 8;
    const ANSWER_NEG_SLOT: usize = 9;
    const ANSWER_POS_SLOT: usize = 10;
    /// Logit gain on chain transitions.
    const CHAIN_GAIN: f32 = 4.0;
    /// Logit gain on the concept channel at the answer decision.
    const ANSWER_GAIN: f32 = 2.0;
}

/// Build a planted chain model. `num_layers` differs between the source
/// (parent) and target (child) roles; everything else is shared so the
/// identity adapter transfers the concept channel exactly.
pub fn planted_chain_model(model_id: &str, num_layers: usize, max_context: usize) -> Model {
    let spec = ModelSpec {
        model_id: model_id.to_string(),
        num_layers,
        hidden_dim: PlantedToy::HIDDEN_DIM,
        num_heads: PlantedToy::NUM_HEADS,
        head_dim: PlantedToy::HIDDEN_DIM / PlantedToy::NUM_HEADS,
        vocab_size: ByteTokenizer::VOCAB_SIZE,
        max_context,
        norm_epsilon: 1e-5,
    };
    let h = spec.hidden_dim;
    let chain: Vec<usize> = PlantedToy::CHAIN.bytes().map(usize::from).collect();

    // token embeddings: default slot for everything, one slot per chain byte
    let mut token_embedding = vec![0.0f32; spec.vocab_size * h];
    for t in 0..spec.vocab_size {
        token_embedding[t * h + PlantedToy::DEFAULT_SLOT] = 1.0;
    }
    let mut set_emb = |byte: usize, slot: usize, concept: f32| {
        let row = &mut token_embedding[byte * h..(byte + 1) * h];
        row.fill(0.0);
        row[slot] = 1.0;
        row[PlantedToy::CONCEPT_SLOT] = concept;
    };
    for (slot, &byte) in chain.iter().enumerate() {
        set_emb(byte, slot, 0.0);
    }
    set_emb(b'}' as usize, PlantedToy::CLOSE_SLOT, 0.0);
    set_emb(
        PlantedToy::ANSWER_NEG as usize,
        PlantedToy::ANSWER_NEG_SLOT,
        -1.0,
    );
    set_emb(
        PlantedToy::ANSWER_POS as usize,
        PlantedToy::ANSWER_POS_SLOT,
        1.0,
    );

    // lm head: each row reads the slot of the byte it succeeds
    let k = PlantedToy::CHAIN_GAIN;
    let g = PlantedToy::ANSWER_GAIN;
    let mut lm_head = vec![0.0f32; spec.vocab_size * h];
    let mut set_row = |byte: usize, entries: &[(usize, f32)]| {
        for &(slot, v) in entries {
            lm_head[byte * h + slot] = v;
        }
    };
    // any non-chain byte -> chain start
    set_row(chain[0], &[(PlantedToy::DEFAULT_SLOT, k)]);
    // successor transitions along "\boxed{"
    for win in chain.windows(2) {
        let (from_slot, to_byte) = (
            chain.iter().position(|&b| b == win[0]).unwrap(),
            win[1],
        );
        set_row(to_byte, &[(from_slot, k)]);
    }
    // '{' -> answer digit, decided on the concept channel
    let open_slot = chain.len() - 1;
    set_row(
        PlantedToy::ANSWER_POS as usize,
        &[(open_slot, k), (PlantedToy::CONCEPT_SLOT, g)],
    );
    set_row(
        PlantedToy::ANSWER_NEG as usize,
        &[(open_slot, k), (PlantedToy::CONCEPT_SLOT, -g)],
    );
    // either digit -> '}' -> EOS
    set_row(
        b'}' as usize,
        &[
            (PlantedToy::ANSWER_NEG_SLOT, k),
            (PlantedToy::ANSWER_POS_SLOT, k),
        ],
    );
    set_row(ByteTokenizer::EOS as usize, &[(PlantedToy::CLOSE_SLOT, k)]);

    let zero_layer = LayerWeights {
        attn_norm: vec![1.0; h],
        wq: vec![0.0; h * h],
        wk: vec![0.0; h * h],
        wv: vec![0.0; h * h],
        wo: vec![0.0; h * h],
        mlp_norm: vec![1.0; h],
        w_up: vec![0.0; spec.ffn_dim() * h],
        w_down: vec![0.0; h * spec.ffn_dim()],
    };
    let weights = Weights {
        token_embedding,
        position_embedding: vec![0.0; spec.max_context * h],
        layers: vec![zero_layer; num_layers],
        final_norm: vec![1.0; h],
        lm_head,
    };
    Model::new(spec, weights).expect("planted toy dimensions are internally consistent")
}

/// Build a seeded random model over the byte vocabulary. Weight scales are
/// chosen so activations stay finite and well-conditioned across layers.
pub fn random_model(
    model_id: &str,
    num_layers: usize,
    hidden_dim: usize,
    num_heads: usize,
    max_context: usize,
    seed: u64,
) -> Model {
    assert!(hidden_dim % num_heads == 0, "heads must divide hidden dim");
    let spec = ModelSpec {
        model_id: model_id.to_string(),
        num_layers,
        hidden_dim,
        num_heads,
        head_dim: hidden_dim / num_heads,
        vocab_size: ByteTokenizer::VOCAB_SIZE,
        max_context,
        norm_epsilon: 1e-5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb = Normal::new(0.0f32, 0.4).unwrap();
    let proj = Normal::new(0.0f32, 0.08).unwrap();
    let head = Normal::new(0.0f32, 0.3).unwrap();
    let draw = |dist: Normal<f32>, n: usize, rng: &mut ChaCha8Rng| -> Vec<f32> {
        (0..n).map(|_| dist.sample(rng)).collect()
    };

    let h = spec.hidden_dim;
    let f = spec.ffn_dim();
    let layers = (0..num_layers)
        .map(|_| LayerWeights {
            attn_norm: gain_jitter(h, &mut rng),
            wq: draw(proj, h * h, &mut rng),
            wk: draw(proj, h * h, &mut rng),
            wv: draw(proj, h * h, &mut rng),
            wo: draw(proj, h * h, &mut rng),
            mlp_norm: gain_jitter(h, &mut rng),
            w_up: draw(proj, f * h, &mut rng),
            w_down: draw(proj, h * f, &mut rng),
        })
        .collect();
    let weights = Weights {
        token_embedding: draw(emb, spec.vocab_size * h, &mut rng),
        position_embedding: draw(Normal::new(0.0f32, 0.1).unwrap(), spec.max_context * h, &mut rng),
        layers,
        final_norm: gain_jitter(h, &mut rng),
        lm_head: draw(head, spec.vocab_size * h, &mut rng),
    };
    Model::new(spec, weights).expect("random toy dimensions are internally consistent")
}

fn gain_jitter(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..n).map(|_| 1.0 + rng.gen_range(-0.05..0.05)).collect()
}
