// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters of a GPT-2 style decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub d_mlp: usize,
    pub n_ctx: usize,
    pub vocab_size: usize,
    pub layer_norm_eps: f32,
}

impl ModelConfig {
    /// GPT-2 Small (124M).
    pub const fn gpt2_small() -> Self {
        Self {
            n_layers: 12,
            n_heads: 12,
            d_model: 768,
            d_head: 64,
            d_mlp: 3072,
            n_ctx: 1024,
            vocab_size: 50_257,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_head", self.d_head),
            ("d_mlp", self.d_mlp),
            ("n_ctx", self.n_ctx),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Argument(format!("model dimension {name} must be positive")));
        }
        if self.d_model != self.n_heads * self.d_head {
            return Err(Error::Argument(format!(
                "d_model ({}) must equal n_heads ({}) * d_head ({})",
                self.d_model, self.n_heads, self.d_head
            )));
        }
        if self.layer_norm_eps.is_nan() || self.layer_norm_eps <= 0.0 {
            return Err(Error::Argument("layer_norm_eps must be positive".into()));
        }
        Ok(())
    }

    /// Total number of attention heads across all layers.
    pub fn total_heads(&self) -> usize {
        self.n_layers * self.n_heads
    }

    /// Number of parameters a checkpoint of this shape carries (tied unembedding
    /// counted once).
    pub fn parameter_count(&self) -> usize {
        let d = self.d_model;
        let per_layer = 2 * d // ln_1
            + d * 3 * d + 3 * d // c_attn
            + d * d + d // c_proj
            + 2 * d // ln_2
            + d * self.d_mlp + self.d_mlp // c_fc
            + self.d_mlp * d + d; // mlp c_proj
        self.vocab_size * d + self.n_ctx * d + self.n_layers * per_layer + 2 * d
    }
}

/// The subset of a Hugging Face `config.json` for GPT-2 that fixes the
/// architecture.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HfConfig {
    n_layer: usize,
    n_head: usize,
    n_embd: usize,
    #[serde(default)]
    n_positions: Option<usize>,
    #[serde(default)]
    n_ctx: Option<usize>,
    vocab_size: usize,
    #[serde(default)]
    n_inner: Option<usize>,
    #[serde(default = "default_eps")]
    layer_norm_epsilon: f32,
    #[serde(default = "default_activation")]
    activation_function: String,
}

fn default_eps() -> f32 {
    1e-5
}

fn default_activation() -> String {
    "gelu_new".into()
}

impl ModelConfig {
    /// Reads a Hugging Face style GPT-2 `config.json`.
    pub fn from_hf_json(text: &str) -> Result<Self> {
        let hf: HfConfig = serde_json::from_str(text)
            .map_err(|e| Error::parse("model config.json", e.line(), e.to_string()))?;
        if hf.activation_function != "gelu_new" {
            return Err(Error::Argument(format!(
                "unsupported activation {:?}; only gelu_new is implemented",
                hf.activation_function
            )));
        }
        if hf.n_head == 0 || hf.n_embd % hf.n_head != 0 {
            return Err(Error::Argument(format!(
                "n_embd ({}) is not divisible by n_head ({})",
                hf.n_embd, hf.n_head
            )));
        }
        let c = Self {
            n_layers: hf.n_layer,
            n_heads: hf.n_head,
            d_model: hf.n_embd,
            d_head: hf.n_embd / hf.n_head,
            d_mlp: hf.n_inner.unwrap_or(4 * hf.n_embd),
            n_ctx: hf
                .n_positions
                .or(hf.n_ctx)
                .ok_or_else(|| Error::parse("model config.json", 0, "missing n_positions"))?,
            vocab_size: hf.vocab_size,
            layer_norm_eps: hf.layer_norm_epsilon,
        };
        c.validate()?;
        Ok(c)
    }

    /// Hugging Face style `config.json` for this architecture.
    pub fn to_hf_json(&self) -> serde_json::Value {
        serde_json::json!({
            "model_type": "gpt2",
            "architectures": ["GPT2LMHeadModel"],
            "n_layer": self.n_layers,
            "n_head": self.n_heads,
            "n_embd": self.d_model,
            "n_positions": self.n_ctx,
            "n_ctx": self.n_ctx,
            "vocab_size": self.vocab_size,
            "n_inner": self.d_mlp,
            "layer_norm_epsilon": self.layer_norm_eps,
            "activation_function": "gelu_new",
            "attn_pdrop": 0.0,
            "embd_pdrop": 0.0,
            "resid_pdrop": 0.0,
        })
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::gpt2_small()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gpt2_small_is_valid() {
        let c = ModelConfig::gpt2_small();
        c.validate().unwrap();
        assert_eq!(c.total_heads(), 144);
        // 124,439,808: the published GPT-2 Small parameter count
        assert_eq!(c.parameter_count(), 124_439_808);
    }

    #[test]
    fn head_split_must_tile_model_width() {
        let c = ModelConfig {
            d_head: 60,
            ..ModelConfig::gpt2_small()
        };
        assert!(matches!(c.validate(), Err(Error::Argument(_))));
    }

    #[test]
    fn hf_config_round_trip() {
        let c = ModelConfig::gpt2_small();
        let back = ModelConfig::from_hf_json(&c.to_hf_json().to_string()).unwrap();
        assert_eq!(back, c);
        // the published GPT-2 config.json leaves n_inner null
        let hf = r#"{"n_layer":12,"n_head":12,"n_embd":768,"n_positions":1024,
                    "vocab_size":50257,"n_inner":null,"layer_norm_epsilon":1e-05,
                    "activation_function":"gelu_new"}"#;
        assert_eq!(ModelConfig::from_hf_json(hf).unwrap(), c);
        assert!(ModelConfig::from_hf_json("{").is_err());
    }

    #[test]
    fn zero_dimension_rejected() {
        let c = ModelConfig {
            d_mlp: 0,
            ..ModelConfig::gpt2_small()
        };
        assert!(c.validate().is_err());
    }
}
