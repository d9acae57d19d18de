// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hook sites and edits understood by the forward pass.
//!
//! Two site kinds exist per layer:
//!
//! - [`SiteKind::AttnHeadSlice`]: one head's `d_head`-wide weighted-value
//!   vector `z_h`, before the shared output projection.
//! - [`SiteKind::AttnOut`]: the full `d_model`-wide attention output
//!   (`concat(z) · W_O + b_O`) that is added to the residual stream.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};

/// What is read or written at a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteKind {
    /// Full attention-block output after `W_O` and bias.
    AttnOut,
    /// One head's pre-projection slice.
    AttnHeadSlice { head: usize },
}

/// A (layer, kind, position) address inside one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HookSite {
    pub layer: usize,
    pub kind: SiteKind,
    pub position: usize,
}

impl HookSite {
    pub const fn attn_out(layer: usize, position: usize) -> Self {
        Self {
            layer,
            kind: SiteKind::AttnOut,
            position,
        }
    }

    pub const fn head_slice(layer: usize, head: usize, position: usize) -> Self {
        Self {
            layer,
            kind: SiteKind::AttnHeadSlice { head },
            position,
        }
    }

    /// The same layer/kind at another position.
    pub const fn at(self, position: usize) -> Self {
        Self { position, ..self }
    }

    /// Width of the activation stored at this site.
    pub fn width(&self, config: &ModelConfig) -> usize {
        match self.kind {
            SiteKind::AttnOut => config.d_model,
            SiteKind::AttnHeadSlice { .. } => config.d_head,
        }
    }

    /// Checks layer/head bounds and, when `seq_len` is given, the position.
    pub fn validate(&self, config: &ModelConfig, seq_len: Option<usize>) -> Result<()> {
        if self.layer >= config.n_layers {
            return Err(Error::Range(format!(
                "layer {} outside 0..{}",
                self.layer,
                config.n_layers - 1
            )));
        }
        if let SiteKind::AttnHeadSlice { head } = self.kind {
            if head >= config.n_heads {
                return Err(Error::Range(format!(
                    "head {head} outside 0..{}",
                    config.n_heads - 1
                )));
            }
        }
        if let Some(len) = seq_len {
            if self.position >= len {
                return Err(Error::Range(format!(
                    "position {} outside sequence of length {len}",
                    self.position
                )));
            }
        }
        Ok(())
    }

    /// All `1 + n_heads` sites of every layer at `position`.
    pub fn all_attention_sites(config: &ModelConfig, position: usize) -> Vec<Self> {
        let mut sites = Vec::with_capacity(config.n_layers * (config.n_heads + 1));
        for layer in 0..config.n_layers {
            sites.push(Self::attn_out(layer, position));
            for head in 0..config.n_heads {
                sites.push(Self::head_slice(layer, head, position));
            }
        }
        sites
    }
}

impl fmt::Display for HookSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SiteKind::AttnOut => write!(f, "L{}.attn_out@{}", self.layer, self.position),
            SiteKind::AttnHeadSlice { head } => {
                write!(f, "L{}H{}.z@{}", self.layer, head, self.position)
            }
        }
    }
}

/// Value written at an edited site.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// An activation recorded in some run. `source` is the site it was read
    /// from, kept for provenance.
    Cached { source: HookSite, values: Arc<[f32]> },
    /// The zero vector of the site's width.
    Zero,
}

/// One declarative edit: overwrite the activation at `site` with `payload`
/// before anything downstream reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSpec {
    pub site: HookSite,
    pub payload: Payload,
}

impl InterventionSpec {
    pub fn zero(site: HookSite) -> Self {
        Self {
            site,
            payload: Payload::Zero,
        }
    }

    pub fn cached(site: HookSite, source: HookSite, values: Arc<[f32]>) -> Self {
        Self {
            site,
            payload: Payload::Cached { source, values },
        }
    }

    pub(crate) fn validate(&self, config: &ModelConfig, seq_len: usize) -> Result<()> {
        self.site.validate(config, Some(seq_len))?;
        if let Payload::Cached { values, .. } = &self.payload {
            let want = self.site.width(config);
            if values.len() != want {
                return Err(Error::Argument(format!(
                    "edit at {} carries {} values, site width is {want}",
                    self.site,
                    values.len()
                )));
            }
        }
        Ok(())
    }
}
