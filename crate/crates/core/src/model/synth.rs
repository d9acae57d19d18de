// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded synthetic checkpoints.
//!
//! These have GPT-2's architecture but random parameters. They exist so the
//! forward pass, hooks and interventions can be checked against an external
//! reference implementation (and exercised end to end) without the pretrained
//! checkpoint. Each tensor draws from its own ChaCha8 stream keyed by
//! `(seed, tensor index)`, so the output depends only on the seed and config.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::weights::{expected_tensors, sha256_hex, LayerWeights, ModelWeights};
use crate::error::Result;

const INIT_STD: f32 = 0.02;
// wider than INIT_STD so attention patterns are far from uniform
const QKV_STD: f32 = 0.06;
const LN_GAIN_STD: f32 = 0.1;

fn normal_tensor(seed: u64, index: u64, len: usize, mean: f32, std: f32) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let dist = Normal::new(mean, std).expect("finite std");
    (0..len).map(|_| dist.sample(&mut rng)).collect()
}

/// Builds a synthetic checkpoint for `config` from `seed`.
pub fn synthetic_weights(config: ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    let names = expected_tensors(&config);
    let mut tensors = names.iter().enumerate().map(|(i, (name, shape))| {
        let len: usize = shape.iter().product();
        let idx = i as u64;
        let (mean, std) = if name.ends_with("ln_1.weight")
            || name.ends_with("ln_2.weight")
            || name == "ln_f.weight"
        {
            (1.0, LN_GAIN_STD)
        } else if name.ends_with("c_attn.weight") {
            (0.0, QKV_STD)
        } else {
            (0.0, INIT_STD)
        };
        normal_tensor(seed, idx, len, mean, std)
    });
    let mut next = || tensors.next().expect("tensor count matches layout");

    let token_embedding = next();
    let position_embedding = next();
    let mut layers = Vec::with_capacity(config.n_layers);
    for _ in 0..config.n_layers {
        layers.push(LayerWeights {
            ln1_gain: next(),
            ln1_bias: next(),
            qkv_weight: next(),
            qkv_bias: next(),
            out_weight: next(),
            out_bias: next(),
            ln2_gain: next(),
            ln2_bias: next(),
            fc_weight: next(),
            fc_bias: next(),
            fc_out_weight: next(),
            fc_out_bias: next(),
        });
    }
    let final_ln_gain = next();
    let final_ln_bias = next();

    let mut weights = ModelWeights {
        config,
        token_embedding,
        position_embedding,
        layers,
        final_ln_gain,
        final_ln_bias,
        content_hash: String::new(),
    };
    weights.content_hash = sha256_hex(&weights.to_safetensors_bytes()?);
    Ok(weights)
}

/// A small configuration that keeps GPT-2's vocabulary (so the real tokenizer
/// applies) but shrinks every other dimension. Used for fast tests.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        n_layers: 3,
        n_heads: 4,
        d_model: 32,
        d_head: 8,
        d_mlp: 128,
        n_ctx: 64,
        vocab_size: 50_257,
        layer_norm_eps: 1e-5,
    }
}
