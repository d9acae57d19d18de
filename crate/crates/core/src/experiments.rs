// SPDX-License-Identifier: MIT OR Apache-2.0

//! The experiment suite: baseline table, layer and head sweeps,
//! ablation/rescue curves with random controls, cross-form effects and
//! external validation.
//!
//! Every intervention edits the negated pass only; the affirmative log-prob
//! of each pair is computed once and reused. Work is spread over examples
//! with rayon, and results are collected in input order, so outputs do not
//! depend on scheduling.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{NegationForm, PairSource, PairTokens, TemplateName, CAN_ABILITY_FORMS};
use crate::error::{Error, Result};
use crate::interventions::{
    ablate_then_rescue, build_ablation, build_head_patches, build_layer_patch, build_null_self_patch,
    cache_affirmative, sample_random_heads, HeadId, HeadSet, HeadSetLabel,
};
use crate::metrics::{aggregate, jaccard, rank_heads, top_k, AggregateStats, HeadRanking};
use crate::model::{HookSite, InterventionSpec, ModelConfig, ModelWeights, SiteKind};

/// Knobs shared by all experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub k_values: Vec<usize>,
    /// k used for cross-form and external validation.
    pub k: usize,
    pub control_seeds: Vec<u64>,
    /// Per-sweep cap on the number of examples; `None` uses all.
    pub subsample: Option<usize>,
    /// Size of the per-form head sets compared by Jaccard similarity.
    pub top_m: usize,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            k_values: vec![1, 2, 4, 8, 16],
            k: 8,
            control_seeds: vec![0, 1, 2, 3, 4],
            subsample: None,
            top_m: 10,
            dev_path: None,
            test_path: None,
            checkpoint_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        let heads = model.total_heads();
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("k_values must be strictly ascending".into()));
        }
        if let Some(&k) = self.k_values.iter().chain([&self.k, &self.top_m]).find(|&&k| k > heads) {
            return Err(Error::Argument(format!("k = {k} exceeds the {heads} heads")));
        }
        if self.top_m == 0 {
            return Err(Error::Argument("top_m must be positive".into()));
        }
        if self.subsample == Some(0) {
            return Err(Error::Argument("subsample cap must be positive".into()));
        }
        Ok(())
    }
}

/// Keeps at most `cap` pairs, chosen by `seed`, preserving input order.
pub fn subsample(pairs: &[PairTokens], cap: Option<usize>, seed: u64) -> Vec<PairTokens> {
    match cap {
        Some(cap) if cap < pairs.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, pairs.len(), cap).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| pairs[i].clone()).collect()
        }
        _ => pairs.to_vec(),
    }
}

/// Ablated, rescued and per-seed control scores at one k.
type KScores = (f64, f64, Vec<f64>);

fn nonempty(pairs: &[PairTokens], what: &str) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput(format!("{what}: no pairs")));
    }
    Ok(())
}

/// Per-pair pieces reused across conditions.
struct Scored {
    affirmative: f64,
    baseline: f64,
}

fn score_baseline(model: &ModelWeights, p: &PairTokens) -> Result<Scored> {
    let affirmative = model.span_logprob(&p.affirmative, &p.target, &[])?;
    let negated = model.span_logprob(&p.negated, &p.target, &[])?;
    Ok(Scored {
        affirmative,
        baseline: affirmative - negated,
    })
}

fn nes_with(model: &ModelWeights, p: &PairTokens, s: &Scored, edits: &[InterventionSpec]) -> Result<f64> {
    Ok(s.affirmative - model.span_logprob(&p.negated, &p.target, edits)?)
}

/// Baseline NES of every pair, in input order.
pub fn baseline_scores(model: &ModelWeights, pairs: &[PairTokens]) -> Result<Vec<f64>> {
    pairs
        .par_iter()
        .map(|p| score_baseline(model, p).map(|s| s.baseline))
        .collect()
}

/// One row of the baseline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRow {
    pub template: TemplateName,
    pub stats: AggregateStats,
}

/// Baseline NES statistics per template, in `templates` order.
pub fn run_baseline(
    model: &ModelWeights,
    pairs: &[PairTokens],
    templates: &[TemplateName],
) -> Result<Vec<TemplateRow>> {
    let scores = baseline_scores(model, pairs)?;
    let mut by_template: BTreeMap<TemplateName, Vec<f64>> = BTreeMap::new();
    for (p, s) in pairs.iter().zip(scores) {
        if let PairSource::Template(t) = p.template {
            by_template.entry(t).or_default().push(s);
        }
    }
    templates
        .iter()
        .map(|&t| {
            let values = by_template
                .get(&t)
                .ok_or_else(|| Error::Completeness(format!("template {t} has no examples")))?;
            Ok(TemplateRow {
                template: t,
                stats: aggregate(values)?,
            })
        })
        .collect()
}

/// One row of the layer sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer: usize,
    pub stats: AggregateStats,
}

/// ΔNES from patching each layer's affirmative attention output into the
/// negated run.
pub fn run_layer_sweep(cfg: &ExperimentConfig, model: &ModelWeights, pairs: &[PairTokens]) -> Result<Vec<LayerRow>> {
    let pairs = subsample(pairs, cfg.subsample, cfg.seed);
    nonempty(&pairs, "layer sweep")?;
    let n_layers = model.config.n_layers;
    let deltas: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|p| {
            let s = score_baseline(model, p)?;
            let cache = cache_affirmative(model, &p.id, &p.affirmative)?;
            (0..n_layers)
                .map(|layer| {
                    let spec = build_layer_patch(&cache, layer, p.negated.len())?;
                    Ok(nes_with(model, p, &s, &[spec])? - s.baseline)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    (0..n_layers)
        .map(|layer| {
            let column: Vec<f64> = deltas.iter().map(|d| d[layer]).collect();
            Ok(LayerRow {
                layer,
                stats: aggregate(&column)?,
            })
        })
        .collect()
}

/// Per-example ΔNES for every head, the raw material for rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSweep {
    pub heads: Vec<HeadId>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub pair_id: String,
    pub form: Option<NegationForm>,
    /// Aligned with [`HeadSweep::heads`].
    pub deltas: Vec<f64>,
}

impl HeadSweep {
    /// Ranks heads over the rows accepted by `keep`.
    pub fn ranking(&self, config: &ModelConfig, keep: impl Fn(&SweepRow) -> bool) -> Result<HeadRanking> {
        let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| keep(r)).collect();
        let sweep: BTreeMap<HeadId, Vec<f64>> = self
            .heads
            .iter()
            .enumerate()
            .map(|(i, &h)| (h, rows.iter().map(|r| r.deltas[i]).collect()))
            .collect();
        rank_heads(config, &sweep)
    }
}

/// Patches each head's cached affirmative slice into the negated run, one
/// head at a time.
pub fn run_head_sweep(cfg: &ExperimentConfig, model: &ModelWeights, pairs: &[PairTokens]) -> Result<HeadSweep> {
    let pairs = subsample(pairs, cfg.subsample, cfg.seed);
    nonempty(&pairs, "head sweep")?;
    let heads = HeadId::all(&model.config);
    let rows = pairs
        .par_iter()
        .map(|p| {
            let s = score_baseline(model, p)?;
            let cache = cache_affirmative(model, &p.id, &p.affirmative)?;
            let deltas = heads
                .iter()
                .map(|&h| {
                    let set = HeadSet::new(vec![h], HeadSetLabel::TopK)?;
                    let edits = build_head_patches(&cache, &set, p.negated.len())?;
                    Ok(nes_with(model, p, &s, &edits)? - s.baseline)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow {
                pair_id: p.id.clone(),
                form: p.form,
                deltas,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeadSweep { heads, rows })
}

/// Curve conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveCondition {
    Ablated,
    Rescued,
    RandomControl,
}

impl CurveCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ablated => "ablated",
            Self::Rescued => "rescued",
            Self::RandomControl => "random_control",
        }
    }
}

/// Mean NES under one condition at one k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub condition: CurveCondition,
    /// Control seed; `None` for the top-k conditions.
    pub seed: Option<u64>,
    pub stats: AggregateStats,
}

/// Ablation, rescue and random-control curves over `k = 0` and
/// `cfg.k_values`. At k = 0 every condition equals the baseline.
pub fn run_ablation_rescue_curves(
    cfg: &ExperimentConfig,
    model: &ModelWeights,
    pairs: &[PairTokens],
    ranking: &HeadRanking,
) -> Result<Vec<CurvePoint>> {
    nonempty(pairs, "curves")?;
    let mc = &model.config;
    let top: Vec<HeadSet> = cfg.k_values.iter().map(|&k| top_k(ranking, k)).collect::<Result<_>>()?;
    let controls: Vec<Vec<HeadSet>> = cfg
        .k_values
        .iter()
        .zip(&top)
        .map(|(&k, exclude)| {
            cfg.control_seeds
                .iter()
                .map(|&seed| sample_random_heads(mc, k, exclude, seed))
                .collect()
        })
        .collect::<Result<_>>()?;

    // per pair: baseline, then per k: ablated, rescued, controls...
    let per_pair: Vec<(f64, Vec<KScores>)> = pairs
        .par_iter()
        .map(|p| {
            let s = score_baseline(model, p)?;
            let cache = cache_affirmative(model, &p.id, &p.affirmative)?;
            let n = p.negated.len();
            let per_k = top
                .iter()
                .zip(&controls)
                .map(|(set, ctrl)| {
                    let ablated = nes_with(model, p, &s, &build_ablation(set, n)?)?;
                    let rescued = nes_with(model, p, &s, &ablate_then_rescue(&cache, set, set, n)?)?;
                    let random = ctrl
                        .iter()
                        .map(|c| nes_with(model, p, &s, &build_ablation(c, n)?))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok((ablated, rescued, random))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((s.baseline, per_k))
        })
        .collect::<Result<_>>()?;

    let baseline: Vec<f64> = per_pair.iter().map(|(b, _)| *b).collect();
    let base_stats = aggregate(&baseline)?;
    let mut points = vec![
        CurvePoint { k: 0, condition: CurveCondition::Ablated, seed: None, stats: base_stats },
        CurvePoint { k: 0, condition: CurveCondition::Rescued, seed: None, stats: base_stats },
    ];
    points.extend(cfg.control_seeds.iter().map(|&seed| CurvePoint {
        k: 0,
        condition: CurveCondition::RandomControl,
        seed: Some(seed),
        stats: base_stats,
    }));
    for (ki, &k) in cfg.k_values.iter().enumerate() {
        let column = |f: &dyn Fn(&KScores) -> f64| -> Vec<f64> {
            per_pair.iter().map(|(_, v)| f(&v[ki])).collect()
        };
        points.push(CurvePoint {
            k,
            condition: CurveCondition::Ablated,
            seed: None,
            stats: aggregate(&column(&|v| v.0))?,
        });
        points.push(CurvePoint {
            k,
            condition: CurveCondition::Rescued,
            seed: None,
            stats: aggregate(&column(&|v| v.1))?,
        });
        for (si, &seed) in cfg.control_seeds.iter().enumerate() {
            points.push(CurvePoint {
                k,
                condition: CurveCondition::RandomControl,
                seed: Some(seed),
                stats: aggregate(&column(&|v| v.2[si]))?,
            });
        }
    }
    Ok(points)
}

/// Per-form ΔNES row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormRow {
    pub form: NegationForm,
    pub stats: AggregateStats,
}

/// Mean ΔNES from ablating `heads`, per `can_ability` form.
pub fn run_cross_form(model: &ModelWeights, pairs: &[PairTokens], heads: &HeadSet) -> Result<Vec<FormRow>> {
    let deltas: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let s = score_baseline(model, p)?;
            let ablated = nes_with(model, p, &s, &build_ablation(heads, p.negated.len())?)?;
            Ok(ablated - s.baseline)
        })
        .collect::<Result<_>>()?;
    CAN_ABILITY_FORMS
        .iter()
        .map(|&form| {
            let values: Vec<f64> = pairs
                .iter()
                .zip(&deltas)
                .filter(|(p, _)| p.form == Some(form))
                .map(|(_, d)| *d)
                .collect();
            if values.is_empty() {
                return Err(Error::Completeness(format!("form {form} has no examples")));
            }
            Ok(FormRow {
                form,
                stats: aggregate(&values)?,
            })
        })
        .collect()
}

/// Pairwise Jaccard similarity of per-form top-M head sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaccardMatrix {
    pub forms: Vec<NegationForm>,
    pub top_sets: Vec<Vec<HeadId>>,
    /// `values[i][j]` compares `forms[i]` with `forms[j]`.
    pub values: Vec<Vec<f64>>,
}

impl JaccardMatrix {
    pub fn get(&self, a: NegationForm, b: NegationForm) -> Option<f64> {
        let i = self.forms.iter().position(|&f| f == a)?;
        let j = self.forms.iter().position(|&f| f == b)?;
        Some(self.values[i][j])
    }
}

/// Ranks heads separately on each form's rows of `sweep` and compares the
/// top-`m` sets. Each example's ΔNES does not depend on the other examples,
/// so this equals running a separate sweep per form.
pub fn cross_form_jaccard(config: &ModelConfig, sweep: &HeadSweep, m: usize) -> Result<JaccardMatrix> {
    let forms = CAN_ABILITY_FORMS.to_vec();
    let sets: Vec<HeadSet> = forms
        .iter()
        .map(|&f| {
            if !sweep.rows.iter().any(|r| r.form == Some(f)) {
                return Err(Error::Completeness(format!("form {f} has no dev examples")));
            }
            top_k(&sweep.ranking(config, |r| r.form == Some(f))?, m)
        })
        .collect::<Result<_>>()?;
    let values = sets
        .iter()
        .map(|a| sets.iter().map(|b| jaccard(a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(JaccardMatrix {
        forms,
        top_sets: sets.iter().map(|s| s.heads().to_vec()).collect(),
        values,
    })
}

/// Runs a head sweep on `pairs` and compares per-form top-`m` sets.
pub fn run_cross_form_jaccard(
    cfg: &ExperimentConfig,
    model: &ModelWeights,
    pairs: &[PairTokens],
    m: usize,
) -> Result<JaccardMatrix> {
    let sweep = run_head_sweep(cfg, model, pairs)?;
    cross_form_jaccard(&model.config, &sweep, m)
}

/// Baseline, ablated and rescued NES on external pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalResult {
    pub baseline: AggregateStats,
    pub ablated: AggregateStats,
    pub rescued: AggregateStats,
}

pub fn run_external_validation(model: &ModelWeights, pairs: &[PairTokens], heads: &HeadSet) -> Result<ExternalResult> {
    nonempty(pairs, "external validation")?;
    let scores: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|p| {
            let s = score_baseline(model, p)?;
            let cache = cache_affirmative(model, &p.id, &p.affirmative)?;
            let n = p.negated.len();
            let ablated = nes_with(model, p, &s, &build_ablation(heads, n)?)?;
            let rescued = nes_with(model, p, &s, &ablate_then_rescue(&cache, heads, heads, n)?)?;
            Ok((s.baseline, ablated, rescued))
        })
        .collect::<Result<_>>()?;
    let col = |f: fn(&(f64, f64, f64)) -> f64| scores.iter().map(f).collect::<Vec<_>>();
    Ok(ExternalResult {
        baseline: aggregate(&col(|s| s.0))?,
        ablated: aggregate(&col(|s| s.1))?,
        rescued: aggregate(&col(|s| s.2))?,
    })
}

/// Largest |ΔNES| over pairs when every attention site at the negated
/// prefix's last position is overwritten with its own value.
///
/// An `attn_out` edit and a head-slice edit at the same layer and position
/// conflict, so the 12 `attn_out` sites and the 144 head slices are
/// self-patched in two separate passes.
pub fn null_patch_drift(model: &ModelWeights, pairs: &[PairTokens]) -> Result<f64> {
    let drifts: Vec<f64> = pairs
        .par_iter()
        .map(|p| {
            let s = score_baseline(model, p)?;
            let sites = HookSite::all_attention_sites(&model.config, p.negated.len() - 1);
            let (outs, slices): (Vec<HookSite>, Vec<HookSite>) =
                sites.into_iter().partition(|s| s.kind == SiteKind::AttnOut);
            let mut worst = 0.0f64;
            for group in [outs, slices] {
                let edits = build_null_self_patch(model, &p.negated, &group)?;
                worst = worst.max((nes_with(model, p, &s, &edits)? - s.baseline).abs());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(drifts.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::dataset::{generate_corpus, build_can_ability_slice, Template};
    use crate::model::synth::{synthetic_weights, tiny_config};
    use crate::tokenizer::Vocabulary;

    fn model() -> &'static ModelWeights {
        static M: OnceLock<ModelWeights> = OnceLock::new();
        M.get_or_init(|| synthetic_weights(tiny_config(), 5).unwrap())
    }

    fn slice() -> &'static (Vec<PairTokens>, Vec<PairTokens>) {
        static S: OnceLock<(Vec<PairTokens>, Vec<PairTokens>)> = OnceLock::new();
        S.get_or_init(|| {
            let v = Vocabulary::bundled();
            let corpus = generate_corpus(&Template::all(), 1500 * 8, 1).unwrap();
            let (dev, test) = build_can_ability_slice(&corpus, 10, 30, 20, 1).unwrap();
            let tok = |s: &[crate::dataset::SentencePair]| {
                s.iter().map(|p| p.tokenize(&v).unwrap()).collect::<Vec<_>>()
            };
            (tok(&dev), tok(&test))
        })
    }

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            k_values: vec![1, 2, 4],
            k: 2,
            control_seeds: vec![0, 1],
            top_m: 3,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        let mc = ModelConfig::gpt2_small();
        assert!(ExperimentConfig::default().validate(&mc).is_ok());
        let bad = ExperimentConfig { k_values: vec![4, 2], ..Default::default() };
        assert!(bad.validate(&mc).is_err());
        let bad = ExperimentConfig { k_values: vec![1, 145], ..Default::default() };
        assert!(bad.validate(&mc).is_err());
    }

    #[test]
    fn subsample_is_deterministic_and_ordered() {
        let (dev, _) = slice();
        let a = subsample(dev, Some(7), 3);
        assert_eq!(a, subsample(dev, Some(7), 3));
        assert_eq!(a.len(), 7);
        let pos: Vec<usize> = a
            .iter()
            .map(|p| dev.iter().position(|q| q.id == p.id).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(dev, None, 3).len(), dev.len());
    }

    #[test]
    fn layer_sweep_has_one_row_per_layer() {
        let (dev, _) = slice();
        let rows = run_layer_sweep(&cfg(), model(), &dev[..6]).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.stats.n == 6 && r.stats.mean.is_finite()));
    }

    #[test]
    fn head_sweep_and_jaccard() {
        let (dev, _) = slice();
        let sweep = run_head_sweep(&cfg(), model(), dev).unwrap();
        assert_eq!(sweep.heads.len(), 12);
        let r = sweep.ranking(&model().config, |_| true).unwrap();
        assert_eq!(r.len(), 12);
        assert_eq!(r, run_head_sweep(&cfg(), model(), dev).unwrap().ranking(&model().config, |_| true).unwrap());
        let j = cross_form_jaccard(&model().config, &sweep, 3).unwrap();
        for i in 0..5 {
            assert_eq!(j.values[i][i], 1.0);
            for k in 0..5 {
                assert_eq!(j.values[i][k], j.values[k][i]);
            }
        }
    }

    #[test]
    fn curves_start_at_baseline() {
        let (dev, test) = slice();
        let ranking = run_head_sweep(&cfg(), model(), &dev[..5]).unwrap().ranking(&model().config, |_| true).unwrap();
        let points = run_ablation_rescue_curves(&cfg(), model(), test, &ranking).unwrap();
        let base = aggregate(&baseline_scores(model(), test).unwrap()).unwrap();
        // 3 k values + k=0, each with ablated, rescued, 2 controls
        assert_eq!(points.len(), 4 * 4);
        for p in points.iter().filter(|p| p.k == 0) {
            assert_eq!(p.stats, base);
        }
    }

    #[test]
    fn empty_head_set_changes_nothing() {
        let (_, test) = slice();
        let empty = HeadSet::empty(HeadSetLabel::TopK);
        let rows = run_cross_form(model(), test, &empty).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.stats.mean == 0.0));
        let ext = run_external_validation(model(), &test[..4], &empty).unwrap();
        assert_eq!(ext.baseline, ext.ablated);
        assert_eq!(ext.baseline, ext.rescued);
    }

    #[test]
    fn null_patch_is_neutral() {
        let (_, test) = slice();
        assert!(null_patch_drift(model(), &test[..8]).unwrap() < 1e-5);
    }

    #[test]
    fn baseline_needs_every_template() {
        let (_, test) = slice();
        let rows = run_baseline(model(), test, &[TemplateName::CanAbility]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].stats.n, test.len());
        assert!(matches!(
            run_baseline(model(), test, &[TemplateName::Likes]),
            Err(Error::Completeness(_))
        ));
    }
}
