// SPDX-License-Identifier: MIT OR Apache-2.0

//! Construction of the edits used in the causal experiments: layer patches,
//! head patches, head ablations, rescue, null self-patches, and random
//! control head sets.
//!
//! All edits target the last token of the prefix of the run they are applied
//! to. Affirmative and negated prefixes usually differ in length, so an
//! activation cached at the affirmative prefix's last position is written at
//! the negated prefix's last position.
//!
//! Head-level edits act on the pre-projection slice `z_h`. Because `W_O` is
//! block-structured over heads, zeroing or replacing `z_h` is the same as
//! zeroing or replacing head `h`'s additive contribution to the attention
//! output.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HookSite, InterventionSpec, ModelConfig, ModelWeights, SiteKind};
use crate::tokenizer::TokenId;

/// One attention head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: usize,
    pub head: usize,
}

impl HeadId {
    pub const fn new(layer: usize, head: usize) -> Self {
        Self { layer, head }
    }

    /// Every head of `config`, in (layer, head) order.
    pub fn all(config: &ModelConfig) -> Vec<Self> {
        (0..config.n_layers)
            .flat_map(|l| (0..config.n_heads).map(move |h| Self::new(l, h)))
            .collect()
    }

    pub fn site(self, position: usize) -> HookSite {
        HookSite::head_slice(self.layer, self.head, position)
    }

    fn check(self, config: &ModelConfig) -> Result<()> {
        self.site(0).validate(config, None)
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}H{}", self.layer, self.head)
    }
}

impl FromStr for HeadId {
    type Err = Error;

    /// Parses `L5H11`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("expected a head like `L5H11`, got {s:?}"));
        let rest = s.strip_prefix('L').ok_or_else(bad)?;
        let (layer, head) = rest.split_once('H').ok_or_else(bad)?;
        Ok(Self::new(
            layer.parse().map_err(|_| bad())?,
            head.parse().map_err(|_| bad())?,
        ))
    }
}

/// Where a head set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadSetLabel {
    TopK,
    RandomControl,
}

/// An ordered set of distinct heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadSet {
    heads: Vec<HeadId>,
    label: HeadSetLabel,
}

impl HeadSet {
    /// Fails if `heads` contains a duplicate.
    pub fn new(heads: Vec<HeadId>, label: HeadSetLabel) -> Result<Self> {
        let mut seen = HashSet::with_capacity(heads.len());
        if let Some(dup) = heads.iter().find(|h| !seen.insert(**h)) {
            return Err(Error::Argument(format!("head {dup} appears twice in head set")));
        }
        Ok(Self { heads, label })
    }

    pub fn empty(label: HeadSetLabel) -> Self {
        Self {
            heads: Vec::new(),
            label,
        }
    }

    pub fn heads(&self) -> &[HeadId] {
        &self.heads
    }

    pub fn label(&self) -> HeadSetLabel {
        self.label
    }

    pub fn k(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn contains(&self, head: &HeadId) -> bool {
        self.heads.contains(head)
    }
}

/// Which prefix a cache was recorded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunLabel {
    Affirmative,
    Negated,
}

/// Attention activations recorded at one position of one run: every layer's
/// `attn_out` and every head's slice.
#[derive(Debug, Clone)]
pub struct ActivationCache {
    pub entries: BTreeMap<HookSite, Arc<[f32]>>,
    pub position: usize,
    pub source_label: RunLabel,
    pub source_pair_id: String,
    config: ModelConfig,
}

impl ActivationCache {
    /// Runs `model` over `tokens` and records all attention sites at the last
    /// position.
    pub fn record(
        model: &ModelWeights,
        tokens: &[TokenId],
        label: RunLabel,
        pair_id: &str,
    ) -> Result<Self> {
        let position = tokens
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::Argument(format!("pair {pair_id}: prefix is empty")))?;
        let sites = HookSite::all_attention_sites(&model.config, position);
        let run = model.forward_rows(tokens, &sites, &[], position..position)?;
        Ok(Self {
            entries: run
                .captured
                .into_iter()
                .map(|(k, v)| (k, Arc::from(v)))
                .collect(),
            position,
            source_label: label,
            source_pair_id: pair_id.to_string(),
            config: model.config,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached vector for `layer`/`kind`.
    pub fn get(&self, layer: usize, kind: SiteKind) -> Result<(HookSite, Arc<[f32]>)> {
        let site = HookSite {
            layer,
            kind,
            position: self.position,
        };
        site.validate(&self.config, None)?;
        self.entries
            .get(&site)
            .map(|v| (site, Arc::clone(v)))
            .ok_or_else(|| {
                Error::CacheMiss(format!(
                    "cache for pair {} has no entry for {site}",
                    self.source_pair_id
                ))
            })
    }
}

/// Caches the affirmative run of a pair at its last prefix token.
pub fn cache_affirmative(
    model: &ModelWeights,
    pair_id: &str,
    affirmative_prefix: &[TokenId],
) -> Result<ActivationCache> {
    ActivationCache::record(model, affirmative_prefix, RunLabel::Affirmative, pair_id)
}

fn last_position(prefix_len: usize) -> Result<usize> {
    prefix_len
        .checked_sub(1)
        .ok_or_else(|| Error::Argument("negated prefix is empty".into()))
}

/// Replaces layer `layer`'s attention output at the negated prefix's last
/// position with the cached one.
pub fn build_layer_patch(
    cache: &ActivationCache,
    layer: usize,
    negated_prefix_len: usize,
) -> Result<InterventionSpec> {
    let pos = last_position(negated_prefix_len)?;
    let (source, values) = cache.get(layer, SiteKind::AttnOut)?;
    Ok(InterventionSpec::cached(source.at(pos), source, values))
}

/// One cached-slice replacement per head.
pub fn build_head_patches(
    cache: &ActivationCache,
    heads: &HeadSet,
    negated_prefix_len: usize,
) -> Result<Vec<InterventionSpec>> {
    let pos = last_position(negated_prefix_len)?;
    heads
        .heads()
        .iter()
        .map(|h| {
            let (source, values) = cache.get(h.layer, SiteKind::AttnHeadSlice { head: h.head })?;
            Ok(InterventionSpec::cached(source.at(pos), source, values))
        })
        .collect()
}

/// One zeroing edit per head.
pub fn build_ablation(heads: &HeadSet, negated_prefix_len: usize) -> Result<Vec<InterventionSpec>> {
    let pos = last_position(negated_prefix_len)?;
    Ok(heads
        .heads()
        .iter()
        .map(|h| InterventionSpec::zero(h.site(pos)))
        .collect())
}

/// Cached-slice replacements for `heads`, meant to be appended after an
/// ablation so they override it site by site.
pub fn build_rescue(
    cache: &ActivationCache,
    heads: &HeadSet,
    negated_prefix_len: usize,
) -> Result<Vec<InterventionSpec>> {
    build_head_patches(cache, heads, negated_prefix_len)
}

/// Ablate `ablated`, then re-inject cached slices for `rescued`.
pub fn ablate_then_rescue(
    cache: &ActivationCache,
    ablated: &HeadSet,
    rescued: &HeadSet,
    negated_prefix_len: usize,
) -> Result<Vec<InterventionSpec>> {
    let mut edits = build_ablation(ablated, negated_prefix_len)?;
    edits.extend(build_rescue(cache, rescued, negated_prefix_len)?);
    Ok(edits)
}

/// Edits that write a run's own activations back into it.
pub fn build_null_self_patch(
    model: &ModelWeights,
    negated_prefix: &[TokenId],
    sites: &[HookSite],
) -> Result<Vec<InterventionSpec>> {
    if sites.is_empty() {
        return Ok(Vec::new());
    }
    let last = last_position(negated_prefix.len())?;
    let run = model.forward_rows(negated_prefix, sites, &[], last..last)?;
    sites
        .iter()
        .map(|s| {
            let v = run.capture(s)?;
            Ok(InterventionSpec::cached(*s, *s, Arc::from(v)))
        })
        .collect()
}

/// Draws `k` distinct heads uniformly without replacement from all heads not
/// in `exclude`.
pub fn sample_random_heads(
    config: &ModelConfig,
    k: usize,
    exclude: &HeadSet,
    seed: u64,
) -> Result<HeadSet> {
    for h in exclude.heads() {
        h.check(config)?;
    }
    let pool: Vec<HeadId> = HeadId::all(config)
        .into_iter()
        .filter(|h| !exclude.contains(h))
        .collect();
    if k > pool.len() {
        return Err(Error::Argument(format!(
            "cannot draw {k} heads from the {} not excluded",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    HeadSet::new(heads, HeadSetLabel::RandomControl)
}
