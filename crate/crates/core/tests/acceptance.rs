// SPDX-License-Identifier: MIT OR Apache-2.0

//! One line per acceptance criterion, at its pinned tolerance.
//!
//! Criteria that need the pretrained GPT-2 Small checkpoint
//! (`$NEGASCOPE_HOME/gpt2/model.safetensors`) or the xNot360 pairs
//! (`$NEGASCOPE_HOME/xnot360.csv`) report BLOCKED when those files are
//! absent; set `NEGASCOPE_REQUIRE_PRETRAINED=1` to turn BLOCKED into a
//! failure. `NEGASCOPE_SUBSAMPLE` caps the examples per sweep for those runs.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use serde::Deserialize;

use negascope::dataset::{read_pairs, NegationForm, PairTokens, TemplateName, CAN_ABILITY_FORMS};
use negascope::experiments::{
    run_ablation_rescue_curves, run_cross_form, run_external_validation, run_head_sweep,
    run_layer_sweep, CurveCondition, CurvePoint, ExperimentConfig,
};
use negascope::interventions::{HeadId, HeadSet, HeadSetLabel};
use negascope::metrics::{aggregate, delta_nes, jaccard, rank_heads, top_k};
use negascope::model::synth::synthetic_weights;
use negascope::model::{ModelConfig, ModelWeights};
use negascope::pipeline::{self, GenerateOptions};
use negascope::tokenizer::Vocabulary;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Warn,
    Blocked,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Warn => "WARN",
            Self::Blocked => "BLOCKED",
        }
    }
}

struct Outcome {
    status: Status,
    detail: String,
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn blocked(what: &str) -> Outcome {
    Outcome {
        status: if common::require_pretrained() { Status::Fail } else { Status::Blocked },
        detail: format!("{what} not found under $NEGASCOPE_HOME"),
    }
}

// libtest is off for this target, so write straight to stdout
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

// ------------------------------------------------------------------ shared

struct Shared {
    vocab: Vocabulary,
    synthetic: Option<ModelWeights>,
    pretrained: Option<Option<Pretrained>>,
}

impl Shared {
    /// GPT-2 Small-shaped checkpoint with seeded random weights (seed 0),
    /// the model the reference logits were computed on.
    fn synthetic(&mut self) -> &ModelWeights {
        self.synthetic
            .get_or_insert_with(|| synthetic_weights(ModelConfig::gpt2_small(), 0).unwrap())
    }

    fn pretrained(&mut self) -> Option<&Pretrained> {
        if self.pretrained.is_none() {
            let run = common::pretrained_checkpoint().map(|ckpt| Pretrained::run(&ckpt, &self.vocab));
            self.pretrained = Some(run);
        }
        self.pretrained.as_ref().unwrap().as_ref()
    }
}

/// In-domain experiment results on the pretrained checkpoint.
struct Pretrained {
    layers: Vec<f64>,
    top8: Vec<HeadId>,
    curves: Vec<CurvePoint>,
    crossform: Vec<(NegationForm, f64)>,
    external: Option<[f64; 3]>,
}

impl Pretrained {
    fn run(checkpoint: &Path, vocab: &Vocabulary) -> Self {
        let model = pipeline::load_model(checkpoint, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        pipeline::generate(&GenerateOptions {
            out_dir: dir.path().to_path_buf(),
            total: 12_000,
            seed: 42,
            per_form: 268,
            dev_size: 938,
            test_size: 402,
        })
        .unwrap();
        let load = |name: &str| -> Vec<PairTokens> {
            read_pairs(dir.path().join(name))
                .unwrap()
                .iter()
                .map(|p| p.tokenize(vocab).unwrap())
                .collect()
        };
        let (dev, test) = (load(pipeline::DEV_FILE), load(pipeline::TEST_FILE));
        let cfg = ExperimentConfig {
            subsample: std::env::var("NEGASCOPE_SUBSAMPLE").ok().and_then(|v| v.parse().ok()),
            ..ExperimentConfig::default()
        };
        let layers = run_layer_sweep(&cfg, &model, &dev)
            .unwrap()
            .iter()
            .map(|r| r.stats.mean)
            .collect();
        let ranking = run_head_sweep(&cfg, &model, &dev)
            .unwrap()
            .ranking(&model.config, |_| true)
            .unwrap();
        let top8 = top_k(&ranking, 8).unwrap();
        let curves = run_ablation_rescue_curves(&cfg, &model, &test, &ranking).unwrap();
        let crossform = run_cross_form(&model, &test, &top8)
            .unwrap()
            .iter()
            .map(|r| (r.form, r.stats.mean))
            .collect();
        let external = common::external_pairs().map(|path| {
            let records = negascope::dataset::load_external_pairs(&path, "sentence1", "sentence2", None).unwrap();
            let (kept, _) = negascope::dataset::align_external(vocab, &records);
            let pairs: Vec<PairTokens> = kept.into_iter().map(|a| a.tokens).collect();
            let r = run_external_validation(&model, &pairs, &top8).unwrap();
            [r.baseline.mean, r.ablated.mean, r.rescued.mean]
        });
        Self {
            layers,
            top8: top8.heads().to_vec(),
            curves,
            crossform,
            external,
        }
    }

    fn point(&self, k: usize, cond: CurveCondition) -> Vec<&CurvePoint> {
        self.curves.iter().filter(|p| p.k == k && p.condition == cond).collect()
    }

    fn baseline(&self) -> &CurvePoint {
        self.point(0, CurveCondition::Ablated)[0]
    }
}

// ---------------------------------------------------------------- criteria

#[derive(Deserialize)]
struct ReferencePrompt {
    text: String,
    ids: Vec<u32>,
    top1: u32,
}

#[derive(Deserialize)]
struct ReferenceMeta {
    checkpoint_sha256: String,
    prompts: Vec<ReferencePrompt>,
}

fn forward_fidelity(s: &mut Shared) -> Outcome {
    let meta: ReferenceMeta = serde_json::from_str(include_str!("../data/reference_logits.json")).unwrap();
    let bytes = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference_logits.safetensors")).unwrap();
    let st = safetensors::SafeTensors::deserialize(&bytes).unwrap();
    let t = st.tensor("logits").unwrap();
    let reference: Vec<f32> = t
        .data()
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let prompts = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/prompts.txt")).unwrap();
    let prompts: Vec<&str> = prompts.lines().collect();
    assert_eq!(prompts.len(), 20);

    let vocab = s.vocab.clone();
    let model = s.synthetic();
    if model.content_hash != meta.checkpoint_sha256 {
        return pass_if(false, "synthetic checkpoint hash differs from the reference's".into());
    }
    let v = model.config.vocab_size;
    let (mut worst, mut top1_ok, mut tok_ok) = (0.0f32, 0, 0);
    for (i, (text, r)) in prompts.iter().zip(&meta.prompts).enumerate() {
        assert_eq!(*text, r.text);
        let ids = vocab.encode_ids(text);
        tok_ok += usize::from(ids == r.ids);
        let last = ids.len() - 1;
        let out = model.forward_rows(&ids, &[], &[], last..last + 1).unwrap();
        let row = out.logits.row(last);
        let want = &reference[i * v..(i + 1) * v];
        worst = row.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(worst, f32::max);
        top1_ok += usize::from(out.logits.argmax(last) == r.top1);
    }
    pass_if(
        tok_ok == 20 && top1_ok == 20 && worst <= 1e-3,
        format!(
            "tokenization {tok_ok}/20, top-1 {top1_ok}/20, max |Δlogit| {worst:.2e} (≤ 1e-3) vs transformers GPT2LMHeadModel on the seed-0 synthetic GPT-2 Small checkpoint"
        ),
    )
}

fn tokenizer_parity(s: &mut Shared) -> Outcome {
    let cases = pipeline::parity_cases();
    let matched = cases.iter().filter(|c| s.vocab.encode_ids(&c.text) == c.ids).count();
    let round = cases
        .iter()
        .filter(|c| s.vocab.decode(&s.vocab.encode_ids(&c.text)).unwrap() == c.text)
        .count();
    pass_if(
        cases.len() == 100 && matched == 100 && round == 100,
        format!("{matched}/{} match the reference ids, {round} round trips", cases.len()),
    )
}

fn null_patch(s: &mut Shared) -> Outcome {
    let pairs = pipeline::sample_test_pairs(&s.vocab, 100, 42).unwrap();
    let mut worst = negascope::experiments::null_patch_drift(s.synthetic(), &pairs).unwrap();
    let mut on = "synthetic GPT-2 Small".to_string();
    if let Some(ckpt) = common::pretrained_checkpoint() {
        let m = pipeline::load_model(&ckpt, None).unwrap();
        worst = worst.max(negascope::experiments::null_patch_drift(&m, &pairs).unwrap());
        on.push_str(" and pretrained");
    }
    pass_if(
        pairs.len() == 100 && worst < 1e-5,
        format!("max |ΔNES| {worst:.2e} (< 1e-5) over {} test pairs, {on}", pairs.len()),
    )
}

fn head_decomposition(s: &mut Shared) -> Outcome {
    let pairs = pipeline::sample_test_pairs(&s.vocab, 10, 7).unwrap();
    let model = s.synthetic();
    let (mut recompose, mut patch) = (0.0f32, 0.0f32);
    for p in &pairs {
        let tokens = [p.negated.clone(), p.target.clone()].concat();
        recompose = recompose.max(pipeline::head_recomposition_error(model, &tokens).unwrap());
        patch = patch.max(pipeline::patch_equivalence_error(model, p).unwrap());
    }
    pass_if(
        recompose < 1e-4 && patch < 1e-4,
        format!(
            "Σ heads + b vs attn_out {recompose:.2e}, 144-head vs 12-layer patch {patch:.2e} (< 1e-4) over {} inputs",
            pairs.len()
        ),
    )
}

fn dataset_contract(s: &mut Shared) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    pipeline::generate(&GenerateOptions {
        out_dir: dir.path().to_path_buf(),
        total: 12_000,
        seed: 42,
        per_form: 268,
        dev_size: 938,
        test_size: 402,
    })
    .unwrap();
    let corpus = read_pairs(dir.path().join(pipeline::CORPUS_FILE)).unwrap();
    let dev = read_pairs(dir.path().join(pipeline::DEV_FILE)).unwrap();
    let test = read_pairs(dir.path().join(pipeline::TEST_FILE)).unwrap();
    let mut per_form: BTreeMap<NegationForm, usize> = BTreeMap::new();
    for p in dev.iter().chain(&test) {
        assert_eq!(p.template.template(), Some(TemplateName::CanAbility));
        *per_form.entry(p.form.unwrap()).or_default() += 1;
    }
    let forms_ok = CAN_ABILITY_FORMS.iter().all(|f| per_form.get(f) == Some(&268));
    let bad: Vec<String> = corpus
        .iter()
        .filter_map(|p| common::cue_only_diff(&s.vocab, &p.tokenize(&s.vocab).unwrap()).err())
        .collect();
    pass_if(
        corpus.len() == 12_000 && forms_ok && dev.len() == 938 && test.len() == 402 && bad.is_empty(),
        format!(
            "{} pairs, slice {:?}, dev {} / test {}, {} cue-diff violations{}",
            corpus.len(),
            per_form.values().collect::<Vec<_>>(),
            dev.len(),
            test.len(),
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

fn causal_directionality(s: &mut Shared) -> Outcome {
    let Some(p) = s.pretrained() else { return blocked("gpt2/model.safetensors") };
    let base = p.baseline();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [4, 8, 16] {
        let abl = p.point(k, CurveCondition::Ablated)[0];
        let res = p.point(k, CurveCondition::Rescued)[0];
        let ci = |x: &CurvePoint| x.stats.ci_half_width.unwrap_or(0.0);
        let g1 = abl.stats.mean - base.stats.mean;
        let g2 = res.stats.mean - abl.stats.mean;
        let good = g1 > ci(abl).max(ci(base)) && g2 > ci(res).max(ci(abl));
        ok &= good;
        parts.push(format!("k={k}: abl−base {g1:+.4}, res−abl {g2:+.4}"));
    }
    pass_if(ok, parts.join("; "))
}

fn control_specificity(s: &mut Shared) -> Outcome {
    let Some(p) = s.pretrained() else { return blocked("gpt2/model.safetensors") };
    let base = p.baseline().stats.mean;
    let mut ok = true;
    let mut parts = Vec::new();
    for &k in &ExperimentConfig::default().k_values {
        let top = (p.point(k, CurveCondition::Ablated)[0].stats.mean - base).abs();
        let controls = p.point(k, CurveCondition::RandomControl);
        let drift = controls.iter().map(|c| (c.stats.mean - base).abs()).sum::<f64>() / controls.len() as f64;
        ok &= drift < 0.25 * top;
        parts.push(format!("k={k}: {drift:.4} vs {:.4}", 0.25 * top));
    }
    pass_if(ok, parts.join("; "))
}

fn cross_form(s: &mut Shared) -> Outcome {
    let Some(p) = s.pretrained() else { return blocked("gpt2/model.safetensors") };
    let ok = p.crossform.len() == 5 && p.crossform.iter().all(|(_, d)| *d > 0.0);
    let parts: Vec<String> = p.crossform.iter().map(|(f, d)| format!("{f} {d:+.4}")).collect();
    pass_if(ok, format!("ΔNES_f at k=8: {}", parts.join(", ")))
}

fn mid_layer(s: &mut Shared) -> Outcome {
    let Some(p) = s.pretrained() else { return blocked("gpt2/model.safetensors") };
    let peak = (0..p.layers.len()).max_by(|&a, &b| p.layers[a].total_cmp(&p.layers[b])).unwrap();
    let mid = p.top8.iter().filter(|h| (4..=6).contains(&h.layer)).count();
    let names: Vec<String> = p.top8.iter().map(HeadId::to_string).collect();
    pass_if(
        (3..=6).contains(&peak) && mid >= 4,
        format!("layer peak L{peak}, {mid}/8 top heads in L4–6 ({})", names.join(" ")),
    )
}

fn external_validation(s: &mut Shared) -> Outcome {
    if common::external_pairs().is_none() {
        return blocked("xnot360.csv");
    }
    let Some(p) = s.pretrained() else { return blocked("gpt2/model.safetensors") };
    let [b, a, r] = p.external.expect("external pairs present");
    let reference = [0.762, 0.755, 0.764];
    let close = [b, a, r].iter().zip(reference).all(|(x, y)| (x - y).abs() <= 0.05);
    Outcome {
        status: if a <= b && b <= r { Status::Pass } else { Status::Warn },
        detail: format!(
            "baseline {b:.4}, ablated {a:.4}, rescued {r:.4}; within ±0.05 of 0.762/0.755/0.764: {close}"
        ),
    }
}

fn statistics(_: &mut Shared) -> Outcome {
    let mut fails = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            fails.push(name.to_string());
        }
    };
    let a = aggregate(&[-1.0, -2.0]).unwrap();
    check("failure_rate [-1,-2]", a.failure_rate == 0.0);
    let a = aggregate(&[-1.0, 0.5, 2.0]).unwrap();
    check("failure_rate [-1,0.5,2]", a.failure_rate == 2.0 / 3.0);
    check("median [-1,0.5,2]", a.median == 0.5);
    let a = aggregate(&[1.0, 2.0, 3.0]).unwrap();
    check("mean [1,2,3]", a.mean == 2.0);
    // s = 1 for [1,2,3]
    let ci = 1.96 * 1.0 / 3f64.sqrt();
    check("ci [1,2,3]", (a.ci_half_width.unwrap() - ci).abs() < 1e-12 && (ci - 1.1316).abs() < 1e-4);
    check("ci n=1 absent", aggregate(&[4.0]).unwrap().ci_half_width.is_none());
    check("empty aggregate", aggregate(&[]).is_err());
    check("delta (2.5,1)", delta_nes(2.5, 1.0) == 1.5);
    check("delta (x,x)", delta_nes(0.37, 0.37) == 0.0);

    let cfg = ModelConfig::gpt2_small();
    let set = |hs: &[(usize, usize)]| {
        HeadSet::new(hs.iter().map(|&(l, h)| HeadId::new(l, h)).collect(), HeadSetLabel::TopK).unwrap()
    };
    let x = set(&[(0, 0), (0, 1)]);
    check("jaccard identical", jaccard(&x, &x).unwrap() == 1.0);
    check("jaccard disjoint", jaccard(&x, &set(&[(3, 3)])).unwrap() == 0.0);
    check("jaccard 1/3", jaccard(&x, &set(&[(0, 1), (0, 2)])).unwrap() == 1.0 / 3.0);
    check(
        "jaccard both empty",
        jaccard(&HeadSet::empty(HeadSetLabel::TopK), &HeadSet::empty(HeadSetLabel::TopK)).is_err(),
    );

    let equal: BTreeMap<HeadId, Vec<f64>> = HeadId::all(&cfg).into_iter().map(|h| (h, vec![0.0])).collect();
    let r = rank_heads(&cfg, &equal).unwrap();
    check("tie-break order", r.entries.iter().map(|e| e.head).eq(HeadId::all(&cfg)));
    let mut one = equal.clone();
    one.insert(HeadId::new(7, 3), vec![5.0]);
    check("5.0 ranks first", rank_heads(&cfg, &one).unwrap().entries[0].head == HeadId::new(7, 3));
    check("k=0 empty", top_k(&r, 0).unwrap().is_empty());
    check("k=144 all", top_k(&r, 144).unwrap().k() == 144);
    check("k=145 rejected", top_k(&r, 145).is_err());
    pass_if(fails.is_empty(), if fails.is_empty() { "all examples exact".into() } else { fails.join(", ") })
}

fn reproducibility(_: &mut Shared) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_negascope");
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let ok = |args: &[&str]| {
        let out = Command::new(bin).args(args).current_dir(root).env_remove("NEGASCOPE_HOME").output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["synth-weights", "--tiny", "--seed", "3", "--out", "model"]);
    ok(&["generate", "--total", "400", "--seed", "7", "--out", "data"]);
    let run = [
        "run", "--stage", "all", "--checkpoint", "model/model.safetensors", "--data", "data",
        "--k-values", "1,2,4", "--k", "4", "--top-m", "3", "--seed", "42",
    ];
    let mut dirs = Vec::new();
    for _ in 0..2 {
        ok(&run);
        dirs.push(pipeline::resolve(&root.join(std::fs::read_to_string(root.join("latest")).unwrap().trim())));
    }
    let csvs = |d: &Path| -> BTreeMap<String, Vec<u8>> {
        std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "svg"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect()
    };
    let (a, b) = (csvs(&dirs[0]), csvs(&dirs[1]));
    let csv_count = a.keys().filter(|k| k.ends_with(".csv")).count();
    pass_if(
        dirs[0] != dirs[1] && csv_count == 6 && a == b,
        format!("{} files ({csv_count} CSVs) byte-identical across two `run --stage all` invocations", a.len()),
    )
}

type Criterion = (u32, &'static str, fn(&mut Shared) -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "forward-pass fidelity", forward_fidelity),
    (2, "tokenizer parity", tokenizer_parity),
    (3, "null-patch neutrality", null_patch),
    (4, "head-decomposition identity", head_decomposition),
    (5, "dataset contract", dataset_contract),
    (6, "in-domain causal directionality", causal_directionality),
    (7, "control specificity", control_specificity),
    (8, "cross-form generality", cross_form),
    (9, "mid-layer concentration", mid_layer),
    (10, "external validation directionality", external_validation),
    (11, "statistics unit suite", statistics),
    (12, "reproducibility", reproducibility),
];

fn main() {
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut shared = Shared {
        vocab: Vocabulary::bundled(),
        synthetic: None,
        pretrained: None,
    };
    let mut failed = 0;
    for (n, name, f) in CRITERIA {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut shared))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            pass_if(false, format!("panicked: {msg}"))
        });
        failed += usize::from(outcome.status == Status::Fail);
        emit(&format!("criterion {n:>2} {:<7} {name}: {}", outcome.status.label(), outcome.detail));
    }
    if failed > 0 {
        emit(&format!("{failed} criteria failed"));
        std::process::exit(1);
    }
}
