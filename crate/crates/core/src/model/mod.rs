// SPDX-License-Identifier: MIT OR Apache-2.0

//! GPT-2 Small inference with hook points for reading and overwriting
//! attention activations.

mod config;
mod forward;
mod hooks;
pub mod synth;
mod weights;

pub use config::ModelConfig;
pub use forward::{ForwardResult, Logits};
pub use hooks::{HookSite, InterventionSpec, Payload, SiteKind};
pub use weights::{expected_tensors, sha256_hex, LayerWeights, ModelWeights};
