//! Shared fixtures for the criterion benchmarks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steerage_core::runtime::{random_model, Model};

pub fn bench_model(layers: usize, hidden: usize) -> Model {
    random_model("bench", layers, hidden, 4, 256, 42)
}

pub fn random_diffs(count: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect())
        .collect()
}

pub fn random_answer_table(n: usize, seed: u64) -> Vec<(f64, Option<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let answer = if rng.gen_bool(0.2) {
                None
            } else {
                Some(rng.gen_range(0..5).to_string())
            };
            (0.01 * (i + 1) as f64, answer)
        })
        .collect()
}
