// SPDX-License-Identifier: MIT OR Apache-2.0

//! Negation Effect Score, aggregation and head ranking.
//!
//! NES = log P(target | affirmative) − log P(target | negated), in nats.
//! Negative means the negated prefix makes the target more likely (good
//! negation sensitivity); a failure is NES > 0 strictly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::PairTokens;
use crate::error::{Error, Result};
use crate::interventions::{HeadId, HeadSet, HeadSetLabel};
use crate::model::{InterventionSpec, ModelConfig, ModelWeights};

const Z_95: f64 = 1.96;

/// Scores one pair. Edits apply to the respective prefix pass only.
pub fn nes(
    model: &ModelWeights,
    pair: &PairTokens,
    edits_affirm: &[InterventionSpec],
    edits_neg: &[InterventionSpec],
) -> Result<f64> {
    let a = model.span_logprob(&pair.affirmative, &pair.target, edits_affirm)?;
    let n = model.span_logprob(&pair.negated, &pair.target, edits_neg)?;
    Ok(a - n)
}

pub fn delta_nes(patched: f64, baseline: f64) -> f64 {
    patched - baseline
}

/// Experimental condition a record was scored under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    LayerPatch { layer: usize },
    HeadPatch { layer: usize, head: usize },
    Ablated { k: usize },
    Rescued { k: usize },
    RandomControl { k: usize, seed: u64 },
    NullPatch,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baseline => f.write_str("baseline"),
            Self::LayerPatch { layer } => write!(f, "layer_patch(L{layer})"),
            Self::HeadPatch { layer, head } => write!(f, "head_patch(L{layer}H{head})"),
            Self::Ablated { k } => write!(f, "ablated({k})"),
            Self::Rescued { k } => write!(f, "rescued({k})"),
            Self::RandomControl { k, seed } => write!(f, "random_control({k}, {seed})"),
            Self::NullPatch => f.write_str("null_patch"),
        }
    }
}

/// One scored example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NesRecord {
    pub pair_id: String,
    pub condition: Condition,
    pub nes: f64,
    /// Present iff `condition` is not `Baseline`.
    pub delta_nes: Option<f64>,
}

impl NesRecord {
    pub fn baseline(pair_id: impl Into<String>, nes: f64) -> Self {
        Self {
            pair_id: pair_id.into(),
            condition: Condition::Baseline,
            nes,
            delta_nes: None,
        }
    }

    /// A non-baseline record; `baseline` must be the same pair's baseline.
    pub fn relative_to(baseline: &NesRecord, condition: Condition, nes: f64) -> Result<Self> {
        if baseline.condition != Condition::Baseline {
            return Err(Error::Argument(format!(
                "reference record for {} is {}, not baseline",
                baseline.pair_id, baseline.condition
            )));
        }
        if condition == Condition::Baseline {
            return Err(Error::Argument("use NesRecord::baseline".into()));
        }
        Ok(Self {
            pair_id: baseline.pair_id.clone(),
            condition,
            nes,
            delta_nes: Some(delta_nes(nes, baseline.nes)),
        })
    }
}

/// Summary statistics over examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub failure_rate: f64,
    /// 1.96 × s/√n; absent when n = 1.
    pub ci_half_width: Option<f64>,
}

/// Mean, median (average of the two middle values for even n), failure rate
/// (share of values > 0) and 95% CI half-width from the sample SD.
pub fn aggregate(values: &[f64]) -> Result<AggregateStats> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Argument("aggregate of an empty list".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("non-finite value {v}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let failures = values.iter().filter(|&&v| v > 0.0).count();
    let ci_half_width = (n >= 2).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Z_95 * var.sqrt() / (n as f64).sqrt()
    });
    Ok(AggregateStats {
        n,
        mean,
        median,
        failure_rate: failures as f64 / n as f64,
        ci_half_width,
    })
}

/// One row of a head ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedHead {
    pub head: HeadId,
    pub mean_delta_nes: f64,
    pub ci_half_width: Option<f64>,
}

/// Heads ordered by mean ΔNES, descending; ties by (layer, head).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadRanking {
    pub entries: Vec<RankedHead>,
}

impl HeadRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position (0-based) of a head, if ranked.
    pub fn rank_of(&self, head: HeadId) -> Option<usize> {
        self.entries.iter().position(|e| e.head == head)
    }
}

/// Ranks every head of `config` by its mean ΔNES.
pub fn rank_heads(config: &ModelConfig, sweep: &BTreeMap<HeadId, Vec<f64>>) -> Result<HeadRanking> {
    let mut entries = Vec::with_capacity(config.total_heads());
    for head in HeadId::all(config) {
        let values = sweep
            .get(&head)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::Completeness(format!("head {head} has no sweep values")))?;
        let stats = aggregate(values)?;
        entries.push(RankedHead {
            head,
            mean_delta_nes: stats.mean,
            ci_half_width: stats.ci_half_width,
        });
    }
    entries.sort_by(|a, b| {
        b.mean_delta_nes
            .total_cmp(&a.mean_delta_nes)
            .then(a.head.cmp(&b.head))
    });
    Ok(HeadRanking { entries })
}

/// The first `k` heads of a ranking.
pub fn top_k(ranking: &HeadRanking, k: usize) -> Result<HeadSet> {
    if k > ranking.len() {
        return Err(Error::Argument(format!(
            "k = {k} exceeds the {} ranked heads",
            ranking.len()
        )));
    }
    HeadSet::new(
        ranking.entries[..k].iter().map(|e| e.head).collect(),
        HeadSetLabel::TopK,
    )
}

/// |a ∩ b| / |a ∪ b|.
pub fn jaccard(a: &HeadSet, b: &HeadSet) -> Result<f64> {
    let a: BTreeSet<_> = a.heads().iter().collect();
    let b: BTreeSet<_> = b.heads().iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return Err(Error::Argument("Jaccard of two empty sets is undefined".into()));
    }
    Ok(a.intersection(&b).count() as f64 / union as f64)
}
