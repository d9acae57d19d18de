// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hook-instrumented GPT-2 forward pass.
//!
//! Standard pre-norm GPT-2: token + position embedding, `n_layers` blocks of
//! `x += attn(ln_1(x)); x += mlp(ln_2(x))`, final layer norm, unembedding
//! through the tied token embedding. Edits are applied by value replacement
//! inside the computation, so every downstream operation reads the edited
//! activation. Captures are taken after edits.
//!
//! All arithmetic is `f32`. Every reduction runs in a fixed order on a single
//! thread, so identical inputs give bitwise-identical outputs.

use std::collections::BTreeMap;
use std::ops::Range;

use super::hooks::{HookSite, InterventionSpec, Payload, SiteKind};
use super::weights::{LayerWeights, ModelWeights};
use crate::error::{Error, Result};
use crate::tokenizer::TokenId;

/// Logits for a contiguous block of positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    /// Position of the first stored row.
    pub first_position: usize,
    pub vocab_size: usize,
    /// Row-major `[rows, vocab_size]`.
    pub data: Vec<f32>,
}

impl Logits {
    pub fn rows(&self) -> usize {
        self.data.len() / self.vocab_size
    }

    /// Positions covered by this block.
    pub fn positions(&self) -> Range<usize> {
        self.first_position..self.first_position + self.rows()
    }

    /// Logit row for `position`.
    ///
    /// # Panics
    /// If `position` is not in [`Logits::positions`].
    pub fn row(&self, position: usize) -> &[f32] {
        assert!(
            self.positions().contains(&position),
            "position {position} not in computed rows {:?}",
            self.positions()
        );
        let r = position - self.first_position;
        &self.data[r * self.vocab_size..(r + 1) * self.vocab_size]
    }

    /// Highest-scoring token at `position` (lowest id on ties).
    pub fn argmax(&self, position: usize) -> TokenId {
        let row = self.row(position);
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        best as TokenId
    }

    /// `log softmax(row(position))[token]`, accumulated in f64.
    pub fn log_prob(&self, position: usize, token: TokenId) -> f64 {
        let row = self.row(position);
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let sum: f64 = row.iter().map(|&v| (v as f64 - max).exp()).sum();
        row[token as usize] as f64 - max - sum.ln()
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub logits: Logits,
    /// Activations at the requested sites, recorded after edits.
    pub captured: BTreeMap<HookSite, Vec<f32>>,
}

impl ForwardResult {
    pub fn capture(&self, site: &HookSite) -> Result<&[f32]> {
        self.captured
            .get(site)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::CacheMiss(format!("site {site} was not captured")))
    }
}

/// `out[r] = bias + x[r] · w` for row-major `x: [rows, k]`, `w: [k, n]`.
fn affine(x: &[f32], rows: usize, k: usize, w: &[f32], n: usize, bias: &[f32]) -> Vec<f32> {
    debug_assert_eq!(x.len(), rows * k);
    debug_assert_eq!(w.len(), k * n);
    let mut out = Vec::with_capacity(rows * n);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    // SAFETY: the slices hold exactly rows*k, k*n and rows*n elements with the
    // row-major strides given.
    unsafe {
        matrixmultiply::sgemm(
            rows,
            k,
            n,
            1.0,
            x.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            n as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

fn layer_norm(x: &[f32], d: usize, gain: &[f32], bias: &[f32], eps: f32) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks_exact(d) {
        let mean = row.iter().sum::<f32>() / d as f32;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / d as f32;
        let inv = 1.0 / (var + eps).sqrt();
        out.extend(
            row.iter()
                .zip(gain.iter().zip(bias))
                .map(|(v, (g, b))| (v - mean) * inv * g + b),
        );
    }
    out
}

/// GPT-2's tanh-approximated GELU.
fn gelu(x: f32) -> f32 {
    const C: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

fn write_payload(dst: &mut [f32], payload: &Payload) {
    match payload {
        Payload::Zero => dst.fill(0.0),
        Payload::Cached { values, .. } => dst.copy_from_slice(values),
    }
}

/// Edits grouped per layer, order preserved (later edits win).
struct EditPlan<'a> {
    head: Vec<Vec<&'a InterventionSpec>>,
    attn_out: Vec<Vec<&'a InterventionSpec>>,
}

impl<'a> EditPlan<'a> {
    fn new(weights: &ModelWeights, edits: &'a [InterventionSpec], seq_len: usize) -> Result<Self> {
        let n_layers = weights.config.n_layers;
        let mut plan = Self {
            head: vec![Vec::new(); n_layers],
            attn_out: vec![Vec::new(); n_layers],
        };
        for e in edits {
            e.validate(&weights.config, seq_len)?;
            match e.site.kind {
                SiteKind::AttnOut => plan.attn_out[e.site.layer].push(e),
                SiteKind::AttnHeadSlice { .. } => plan.head[e.site.layer].push(e),
            }
        }
        for layer in 0..n_layers {
            for out_edit in &plan.attn_out[layer] {
                if let Some(h) = plan.head[layer]
                    .iter()
                    .find(|h| h.site.position == out_edit.site.position)
                {
                    return Err(Error::Conflict(format!(
                        "{} and {} edit the same layer and position",
                        out_edit.site, h.site
                    )));
                }
            }
        }
        Ok(plan)
    }
}

impl ModelWeights {
    /// Runs the model over `tokens`, computing logits for every position.
    pub fn forward(
        &self,
        tokens: &[TokenId],
        capture: &[HookSite],
        edits: &[InterventionSpec],
    ) -> Result<ForwardResult> {
        self.forward_rows(tokens, capture, edits, 0..tokens.len())
    }

    /// Like [`ModelWeights::forward`], but only unembeds positions in `rows`.
    pub fn forward_rows(
        &self,
        tokens: &[TokenId],
        capture: &[HookSite],
        edits: &[InterventionSpec],
        rows: Range<usize>,
    ) -> Result<ForwardResult> {
        let cfg = &self.config;
        let t_len = tokens.len();
        if t_len == 0 {
            return Err(Error::Argument("forward pass needs at least one token".into()));
        }
        if t_len > cfg.n_ctx {
            return Err(Error::Range(format!(
                "sequence of {t_len} tokens exceeds context window {}",
                cfg.n_ctx
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
            return Err(Error::Range(format!(
                "token id {bad} outside vocabulary of {}",
                cfg.vocab_size
            )));
        }
        if rows.start > rows.end || rows.end > t_len {
            return Err(Error::Range(format!(
                "logit rows {rows:?} outside sequence of length {t_len}"
            )));
        }
        for site in capture {
            site.validate(cfg, Some(t_len))?;
        }
        let plan = EditPlan::new(self, edits, t_len)?;

        let d = cfg.d_model;
        let mut residual = Vec::with_capacity(t_len * d);
        for (pos, &tok) in tokens.iter().enumerate() {
            let te = &self.token_embedding[tok as usize * d..(tok as usize + 1) * d];
            let pe = &self.position_embedding[pos * d..(pos + 1) * d];
            residual.extend(te.iter().zip(pe).map(|(a, b)| a + b));
        }

        let mut captured = BTreeMap::new();
        for (layer_idx, layer) in self.layers.iter().enumerate() {
            let attn = self.attention_block(
                layer,
                layer_idx,
                &residual,
                t_len,
                &plan,
                capture,
                &mut captured,
            );
            for (r, a) in residual.iter_mut().zip(&attn) {
                *r += a;
            }
            let mlp = self.mlp_block(layer, &residual, t_len);
            for (r, m) in residual.iter_mut().zip(&mlp) {
                *r += m;
            }
        }

        let selected = &residual[rows.start * d..rows.end * d];
        let normed = layer_norm(
            selected,
            d,
            &self.final_ln_gain,
            &self.final_ln_bias,
            cfg.layer_norm_eps,
        );
        let n_rows = rows.len();
        let mut data = vec![0.0f32; n_rows * cfg.vocab_size];
        if n_rows > 0 {
            // SAFETY: `normed` is [n_rows, d]; the embedding is [vocab, d], read
            // transposed through its strides; `data` is [n_rows, vocab].
            unsafe {
                matrixmultiply::sgemm(
                    n_rows,
                    d,
                    cfg.vocab_size,
                    1.0,
                    normed.as_ptr(),
                    d as isize,
                    1,
                    self.token_embedding.as_ptr(),
                    1,
                    d as isize,
                    0.0,
                    data.as_mut_ptr(),
                    cfg.vocab_size as isize,
                    1,
                );
            }
        }

        Ok(ForwardResult {
            logits: Logits {
                first_position: rows.start,
                vocab_size: cfg.vocab_size,
                data,
            },
            captured,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn attention_block(
        &self,
        layer: &LayerWeights,
        layer_idx: usize,
        residual: &[f32],
        t_len: usize,
        plan: &EditPlan<'_>,
        capture: &[HookSite],
        captured: &mut BTreeMap<HookSite, Vec<f32>>,
    ) -> Vec<f32> {
        let cfg = &self.config;
        let (d, dh) = (cfg.d_model, cfg.d_head);
        let x = layer_norm(
            residual,
            d,
            &layer.ln1_gain,
            &layer.ln1_bias,
            cfg.layer_norm_eps,
        );
        let qkv = affine(&x, t_len, d, &layer.qkv_weight, 3 * d, &layer.qkv_bias);
        let scale = (dh as f32).sqrt();

        let mut z = vec![0.0f32; t_len * d];
        let mut scores = vec![0.0f32; t_len];
        for h in 0..cfg.n_heads {
            let off = h * dh;
            for t in 0..t_len {
                let q = &qkv[t * 3 * d + off..t * 3 * d + off + dh];
                let mut max = f32::NEG_INFINITY;
                for (j, s) in scores.iter_mut().enumerate().take(t + 1) {
                    let k = &qkv[j * 3 * d + d + off..j * 3 * d + d + off + dh];
                    let dot: f32 = q.iter().zip(k).map(|(a, b)| a * b).sum();
                    *s = dot / scale;
                    max = max.max(*s);
                }
                let mut denom = 0.0f32;
                for s in scores.iter_mut().take(t + 1) {
                    *s = (*s - max).exp();
                    denom += *s;
                }
                let out = &mut z[t * d + off..t * d + off + dh];
                for (j, s) in scores.iter().enumerate().take(t + 1) {
                    let p = s / denom;
                    let v = &qkv[j * 3 * d + 2 * d + off..j * 3 * d + 2 * d + off + dh];
                    for (o, vv) in out.iter_mut().zip(v) {
                        *o += p * vv;
                    }
                }
            }
        }

        for edit in &plan.head[layer_idx] {
            if let SiteKind::AttnHeadSlice { head } = edit.site.kind {
                let start = edit.site.position * d + head * dh;
                write_payload(&mut z[start..start + dh], &edit.payload);
            }
        }
        for site in capture
            .iter()
            .filter(|s| s.layer == layer_idx && s.kind != SiteKind::AttnOut)
        {
            if let SiteKind::AttnHeadSlice { head } = site.kind {
                let start = site.position * d + head * dh;
                captured.insert(*site, z[start..start + dh].to_vec());
            }
        }

        let mut attn = affine(&z, t_len, d, &layer.out_weight, d, &layer.out_bias);
        for edit in &plan.attn_out[layer_idx] {
            let start = edit.site.position * d;
            write_payload(&mut attn[start..start + d], &edit.payload);
        }
        for site in capture
            .iter()
            .filter(|s| s.layer == layer_idx && s.kind == SiteKind::AttnOut)
        {
            let start = site.position * d;
            captured.insert(*site, attn[start..start + d].to_vec());
        }
        attn
    }

    fn mlp_block(&self, layer: &LayerWeights, residual: &[f32], t_len: usize) -> Vec<f32> {
        let cfg = &self.config;
        let d = cfg.d_model;
        let x = layer_norm(
            residual,
            d,
            &layer.ln2_gain,
            &layer.ln2_bias,
            cfg.layer_norm_eps,
        );
        let mut hidden = affine(&x, t_len, d, &layer.fc_weight, cfg.d_mlp, &layer.fc_bias);
        for v in hidden.iter_mut() {
            *v = gelu(*v);
        }
        affine(
            &hidden,
            t_len,
            cfg.d_mlp,
            &layer.fc_out_weight,
            d,
            &layer.fc_out_bias,
        )
    }

    /// Sum of teacher-forced log-probabilities (nats) of `target` after
    /// `prefix`, from one forward pass over `prefix ⊕ target`. Edits must sit
    /// inside the prefix and apply for the whole pass.
    pub fn span_logprob(
        &self,
        prefix: &[TokenId],
        target: &[TokenId],
        edits: &[InterventionSpec],
    ) -> Result<f64> {
        if target.is_empty() {
            return Err(Error::Argument("target span is empty".into()));
        }
        if prefix.is_empty() {
            return Err(Error::Argument("prefix is empty".into()));
        }
        if prefix.len() + target.len() > self.config.n_ctx {
            return Err(Error::Range(format!(
                "prefix ({}) + target ({}) exceeds context window {}",
                prefix.len(),
                target.len(),
                self.config.n_ctx
            )));
        }
        if let Some(e) = edits.iter().find(|e| e.site.position >= prefix.len()) {
            return Err(Error::Range(format!(
                "edit at {} lies outside the {}-token prefix",
                e.site,
                prefix.len()
            )));
        }
        let mut tokens = Vec::with_capacity(prefix.len() + target.len());
        tokens.extend_from_slice(prefix);
        tokens.extend_from_slice(target);
        let first = prefix.len() - 1;
        let result = self.forward_rows(&tokens, &[], edits, first..first + target.len())?;
        Ok(target
            .iter()
            .enumerate()
            .map(|(j, &tok)| result.logits.log_prob(first + j, tok))
            .sum())
    }

    /// Projects a concatenated head-slice vector (`d_model` wide) through this
    /// layer's `W_O` and bias. Used to check the head decomposition.
    pub fn project_heads(&self, layer: usize, z: &[f32]) -> Vec<f32> {
        let l = &self.layers[layer];
        affine(z, 1, self.config.d_model, &l.out_weight, self.config.d_model, &l.out_bias)
    }
}
