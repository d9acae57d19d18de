// SPDX-License-Identifier: MIT OR Apache-2.0

//! GPT-2 checkpoint loading from safetensors files.
//!
//! Accepted tensor names follow the Hugging Face `GPT2Model` layout, with an
//! optional `transformer.` prefix (as written by `GPT2LMHeadModel`):
//!
//! | name                         | shape             |
//! |------------------------------|-------------------|
//! | `wte.weight`                 | `[vocab, d]`      |
//! | `wpe.weight`                 | `[n_ctx, d]`      |
//! | `h.{i}.ln_1.weight` / `bias` | `[d]`             |
//! | `h.{i}.attn.c_attn.weight`   | `[d, 3d]`         |
//! | `h.{i}.attn.c_attn.bias`     | `[3d]`            |
//! | `h.{i}.attn.c_proj.weight`   | `[d, d]`          |
//! | `h.{i}.attn.c_proj.bias`     | `[d]`             |
//! | `h.{i}.ln_2.weight` / `bias` | `[d]`             |
//! | `h.{i}.mlp.c_fc.weight`      | `[d, d_mlp]`      |
//! | `h.{i}.mlp.c_fc.bias`        | `[d_mlp]`         |
//! | `h.{i}.mlp.c_proj.weight`    | `[d_mlp, d]`      |
//! | `h.{i}.mlp.c_proj.bias`      | `[d]`             |
//! | `ln_f.weight` / `bias`       | `[d]`             |
//!
//! Projection matrices are stored input-major (`y = x · W + b`). The causal
//! mask buffers `h.{i}.attn.bias` / `h.{i}.attn.masked_bias` and a tied
//! `lm_head.weight` are ignored. Only `F32` tensors are accepted.

use std::collections::HashMap;
use std::path::Path;

use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;
use sha2::{Digest, Sha256};
use tracing::debug;

use super::config::ModelConfig;
use crate::error::{Error, Result};

/// Parameters of one transformer block.
#[derive(Debug, Clone)]
pub struct LayerWeights {
    pub ln1_gain: Vec<f32>,
    pub ln1_bias: Vec<f32>,
    /// `[d, 3d]`, columns ordered q | k | v, each split into heads.
    pub qkv_weight: Vec<f32>,
    pub qkv_bias: Vec<f32>,
    /// `W_O`, `[d, d]`; rows `h*d_head..(h+1)*d_head` belong to head `h`.
    pub out_weight: Vec<f32>,
    pub out_bias: Vec<f32>,
    pub ln2_gain: Vec<f32>,
    pub ln2_bias: Vec<f32>,
    pub fc_weight: Vec<f32>,
    pub fc_bias: Vec<f32>,
    pub fc_out_weight: Vec<f32>,
    pub fc_out_bias: Vec<f32>,
}

/// Frozen GPT-2 parameters. The unembedding is tied to `token_embedding`.
#[derive(Debug, Clone)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub token_embedding: Vec<f32>,
    pub position_embedding: Vec<f32>,
    pub layers: Vec<LayerWeights>,
    pub final_ln_gain: Vec<f32>,
    pub final_ln_bias: Vec<f32>,
    /// Hex SHA-256 of the checkpoint file, or of the serialized tensors for
    /// weights built in memory.
    pub content_hash: String,
}

/// Canonical (unprefixed) tensor names with their expected shapes, in file
/// order.
pub fn expected_tensors(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = config.d_model;
    let mut out = vec![
        ("wte.weight".to_string(), vec![config.vocab_size, d]),
        ("wpe.weight".to_string(), vec![config.n_ctx, d]),
    ];
    for i in 0..config.n_layers {
        let p = format!("h.{i}");
        out.extend([
            (format!("{p}.ln_1.weight"), vec![d]),
            (format!("{p}.ln_1.bias"), vec![d]),
            (format!("{p}.attn.c_attn.weight"), vec![d, 3 * d]),
            (format!("{p}.attn.c_attn.bias"), vec![3 * d]),
            (format!("{p}.attn.c_proj.weight"), vec![d, d]),
            (format!("{p}.attn.c_proj.bias"), vec![d]),
            (format!("{p}.ln_2.weight"), vec![d]),
            (format!("{p}.ln_2.bias"), vec![d]),
            (format!("{p}.mlp.c_fc.weight"), vec![d, config.d_mlp]),
            (format!("{p}.mlp.c_fc.bias"), vec![config.d_mlp]),
            (format!("{p}.mlp.c_proj.weight"), vec![config.d_mlp, d]),
            (format!("{p}.mlp.c_proj.bias"), vec![d]),
        ]);
    }
    out.push(("ln_f.weight".to_string(), vec![d]));
    out.push(("ln_f.bias".to_string(), vec![d]));
    out
}

fn is_ignored(name: &str) -> bool {
    name == "lm_head.weight" || name.ends_with(".attn.bias") || name.ends_with(".attn.masked_bias")
}

fn canonical_name(name: &str) -> &str {
    name.strip_prefix("transformer.").unwrap_or(name)
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ModelWeights {
    /// Reads and validates a safetensors checkpoint.
    pub fn load(path: impl AsRef<Path>, config: ModelConfig) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, config)
    }

    /// Parses a safetensors buffer.
    pub fn from_bytes(bytes: &[u8], config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let st = SafeTensors::deserialize(bytes)
            .map_err(|e| Error::parse("safetensors checkpoint", 0, e.to_string()))?;

        let mut by_name: HashMap<&str, TensorView<'_>> = HashMap::new();
        for name in st.names() {
            let canonical = canonical_name(name);
            if is_ignored(canonical) {
                continue;
            }
            let view = st
                .tensor(name)
                .map_err(|e| Error::parse("safetensors checkpoint", 0, e.to_string()))?;
            by_name.insert(canonical, view);
        }

        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let view = by_name
                .remove(name)
                .ok_or_else(|| Error::Integrity(format!("checkpoint is missing tensor `{name}`")))?;
            if view.shape() != shape {
                return Err(Error::Shape {
                    name: name.to_string(),
                    actual: view.shape().to_vec(),
                    expected: shape.to_vec(),
                });
            }
            if view.dtype() != Dtype::F32 {
                return Err(Error::Integrity(format!(
                    "tensor `{name}` has dtype {:?}; only F32 checkpoints are supported",
                    view.dtype()
                )));
            }
            Ok(view
                .data()
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        };

        let expected = expected_tensors(&config);
        let mut shapes: HashMap<&str, &[usize]> = HashMap::new();
        for (n, s) in &expected {
            shapes.insert(n.as_str(), s.as_slice());
        }
        let mut get = |name: &str| take(name, shapes[name]);

        let token_embedding = get("wte.weight")?;
        let position_embedding = get("wpe.weight")?;
        let mut layers = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let p = format!("h.{i}");
            layers.push(LayerWeights {
                ln1_gain: get(&format!("{p}.ln_1.weight"))?,
                ln1_bias: get(&format!("{p}.ln_1.bias"))?,
                qkv_weight: get(&format!("{p}.attn.c_attn.weight"))?,
                qkv_bias: get(&format!("{p}.attn.c_attn.bias"))?,
                out_weight: get(&format!("{p}.attn.c_proj.weight"))?,
                out_bias: get(&format!("{p}.attn.c_proj.bias"))?,
                ln2_gain: get(&format!("{p}.ln_2.weight"))?,
                ln2_bias: get(&format!("{p}.ln_2.bias"))?,
                fc_weight: get(&format!("{p}.mlp.c_fc.weight"))?,
                fc_bias: get(&format!("{p}.mlp.c_fc.bias"))?,
                fc_out_weight: get(&format!("{p}.mlp.c_proj.weight"))?,
                fc_out_bias: get(&format!("{p}.mlp.c_proj.bias"))?,
            });
        }
        let final_ln_gain = get("ln_f.weight")?;
        let final_ln_bias = get("ln_f.bias")?;
        for extra in by_name.keys() {
            debug!(tensor = extra, "ignoring unrecognized checkpoint tensor");
        }

        Ok(Self {
            config,
            token_embedding,
            position_embedding,
            layers,
            final_ln_gain,
            final_ln_bias,
            content_hash: sha256_hex(bytes),
        })
    }

    /// Sum of element counts over all parameter tensors.
    pub fn parameter_count(&self) -> usize {
        let per_layer: usize = self
            .layers
            .iter()
            .map(|l| {
                l.ln1_gain.len()
                    + l.ln1_bias.len()
                    + l.qkv_weight.len()
                    + l.qkv_bias.len()
                    + l.out_weight.len()
                    + l.out_bias.len()
                    + l.ln2_gain.len()
                    + l.ln2_bias.len()
                    + l.fc_weight.len()
                    + l.fc_bias.len()
                    + l.fc_out_weight.len()
                    + l.fc_out_bias.len()
            })
            .sum();
        self.token_embedding.len()
            + self.position_embedding.len()
            + per_layer
            + self.final_ln_gain.len()
            + self.final_ln_bias.len()
    }

    /// Tensors in canonical name order, for serialization.
    fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let expected = expected_tensors(&self.config);
        let mut data: Vec<&[f32]> = vec![&self.token_embedding, &self.position_embedding];
        for l in &self.layers {
            data.extend([
                l.ln1_gain.as_slice(),
                &l.ln1_bias,
                &l.qkv_weight,
                &l.qkv_bias,
                &l.out_weight,
                &l.out_bias,
                &l.ln2_gain,
                &l.ln2_bias,
                &l.fc_weight,
                &l.fc_bias,
                &l.fc_out_weight,
                &l.fc_out_bias,
            ]);
        }
        data.push(&self.final_ln_gain);
        data.push(&self.final_ln_bias);
        expected
            .into_iter()
            .zip(data)
            .map(|((n, s), d)| (n, s, d))
            .collect()
    }

    /// Serializes to safetensors bytes using the canonical names.
    pub fn to_safetensors_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.named_tensors();
        let raw: Vec<(String, Vec<usize>, Vec<u8>)> = tensors
            .into_iter()
            .map(|(n, s, d)| (n, s, d.iter().flat_map(|v| v.to_le_bytes()).collect()))
            .collect();
        let mut views = Vec::with_capacity(raw.len());
        for (name, shape, bytes) in &raw {
            let view = TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map_err(|e| Error::Integrity(format!("tensor `{name}`: {e}")))?;
            views.push((name.clone(), view));
        }
        let mut metadata = HashMap::new();
        metadata.insert("format".to_string(), "pt".to_string());
        safetensors::serialize(views, &Some(metadata))
            .map_err(|e| Error::Integrity(format!("serializing checkpoint: {e}")))
    }

    /// Writes the checkpoint to `path` and returns its content hash.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let path = path.as_ref();
        let bytes = self.to_safetensors_bytes()?;
        std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(&bytes))
    }
}
