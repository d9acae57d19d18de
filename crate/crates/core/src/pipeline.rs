// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `generate`, `run` and `verify` workflows behind the CLI.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::{info, warn};

use crate::dataset::{
    align_external, build_can_ability_slice, generate_corpus, load_external_pairs, read_pairs,
    write_pairs, DatasetManifest, PairTokens, SentencePair, Template, TemplateName,
    CAN_ABILITY_FORMS,
};
use crate::error::{Error, Result};
use crate::experiments::{
    cross_form_jaccard, null_patch_drift, run_ablation_rescue_curves, run_baseline, run_cross_form,
    run_external_validation, run_head_sweep, run_layer_sweep, ExperimentConfig, CurveCondition,
};
use crate::interventions::{build_head_patches, build_layer_patch, cache_affirmative, HeadId, HeadSet, HeadSetLabel};
use crate::metrics::{top_k, HeadRanking};
use crate::model::{HookSite, ModelConfig, ModelWeights};
use crate::report::svg::{bar_chart, line_chart, Series};
use crate::report::{latest_run, tables, FileEntry, RunDir, RunManifest};
use crate::tokenizer::Vocabulary;

pub const CORPUS_FILE: &str = "corpus.csv";
pub const DEV_FILE: &str = "can_ability_dev.csv";
pub const TEST_FILE: &str = "can_ability_test.csv";
pub const DATASET_MANIFEST_FILE: &str = "dataset_manifest.json";
pub const HEADS_FILE: &str = "heads.csv";

/// Root for default data paths, from `NEGASCOPE_HOME`.
pub fn negascope_home() -> Option<PathBuf> {
    std::env::var_os("NEGASCOPE_HOME").map(PathBuf::from)
}

/// Resolves a relative path against `NEGASCOPE_HOME` when it is set and the
/// path does not exist as given.
pub fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(home) = negascope_home() {
            return home.join(path);
        }
    }
    path.to_path_buf()
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(FileEntry::of(path)?.sha256)
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub out_dir: PathBuf,
    pub total: usize,
    pub seed: u64,
    pub per_form: usize,
    pub dev_size: usize,
    pub test_size: usize,
}

/// Writes the corpus, the `can_ability` dev/test splits and a dataset
/// manifest into `out_dir`.
///
/// When the corpus holds fewer than `per_form` pairs for some slice form,
/// the slice shrinks to the smallest form's count and the dev share keeps
/// the configured dev/test ratio.
pub fn generate(opts: &GenerateOptions) -> Result<DatasetManifest> {
    let out = &opts.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let corpus = generate_corpus(&Template::all(), opts.total, opts.seed)?;

    let available = CAN_ABILITY_FORMS
        .iter()
        .map(|&f| {
            corpus
                .iter()
                .filter(|p| p.template.template() == Some(TemplateName::CanAbility) && p.form == Some(f))
                .count()
        })
        .min()
        .unwrap_or(0);
    let per_form = available.min(opts.per_form);
    let (dev_size, test_size) = if per_form == opts.per_form {
        (opts.dev_size, opts.test_size)
    } else {
        let slice = per_form * CAN_ABILITY_FORMS.len();
        let ratio = opts.dev_size as f64 / (opts.dev_size + opts.test_size).max(1) as f64;
        let dev = (slice as f64 * ratio).round() as usize;
        warn!(per_form, "corpus too small for the configured slice; shrinking it");
        (dev, slice - dev)
    };
    let (dev, test) = build_can_ability_slice(&corpus, per_form, dev_size, test_size, opts.seed)?;

    let mut manifest = DatasetManifest::new(opts.seed, &corpus, &dev, &test);
    for (name, pairs) in [(CORPUS_FILE, &corpus), (DEV_FILE, &dev), (TEST_FILE, &test)] {
        let p = out.join(name);
        write_pairs(&p, pairs)?;
        manifest.file_hashes.insert(name.to_string(), hash_file(&p)?);
    }
    let p = out.join(DATASET_MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    info!(total = corpus.len(), dev = dev.len(), test = test.len(), "dataset written");
    Ok(manifest)
}

// ---------------------------------------------------------------- model IO

/// Loads a checkpoint. The architecture comes from `model_config` if given,
/// else from a `config.json` beside the checkpoint, else GPT-2 Small.
pub fn load_model(checkpoint: &Path, model_config: Option<&Path>) -> Result<ModelWeights> {
    let sidecar = checkpoint.with_file_name("config.json");
    let cfg_path = model_config.map(Path::to_path_buf).or_else(|| sidecar.exists().then_some(sidecar));
    let config = match cfg_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            ModelConfig::from_hf_json(&text)?
        }
        None => ModelConfig::gpt2_small(),
    };
    ModelWeights::load(checkpoint, config)
}

pub fn load_vocab(files: Option<(&Path, &Path)>) -> Result<Vocabulary> {
    match files {
        Some((v, m)) => Vocabulary::load(v, m),
        None => Ok(Vocabulary::bundled()),
    }
}

fn tokenize_all(vocab: &Vocabulary, pairs: &[SentencePair]) -> Result<Vec<PairTokens>> {
    pairs.iter().map(|p| p.tokenize(vocab)).collect()
}

// ---------------------------------------------------------------- run

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Baseline,
    Layers,
    Heads,
    Curves,
    Crossform,
    External,
    All,
}

impl Stage {
    const ORDER: [Stage; 6] = [
        Stage::Baseline,
        Stage::Layers,
        Stage::Heads,
        Stage::Curves,
        Stage::Crossform,
        Stage::External,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Layers => "layers",
            Self::Heads => "heads",
            Self::Curves => "curves",
            Self::Crossform => "crossform",
            Self::External => "external",
            Self::All => "all",
        }
    }

    fn expand(self) -> Vec<Stage> {
        match self {
            Self::All => Self::ORDER.to_vec(),
            s => vec![s],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ORDER
            .into_iter()
            .chain([Self::All])
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown stage {s:?}")))
    }
}

/// An external pair file and its column mapping.
#[derive(Debug, Clone)]
pub struct ExternalInput {
    pub path: PathBuf,
    pub affirmative_column: String,
    pub negated_column: String,
    pub label_column: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub stage: Stage,
    pub checkpoint: PathBuf,
    pub model_config: Option<PathBuf>,
    pub vocab: Option<(PathBuf, PathBuf)>,
    /// Directory holding the files written by [`generate`].
    pub data_dir: PathBuf,
    pub external: Option<ExternalInput>,
    /// Ranking to reuse instead of this or the latest run's `heads.csv`.
    pub heads: Option<PathBuf>,
    pub out_root: PathBuf,
    pub cfg: ExperimentConfig,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
}

struct Ctx<'a> {
    opts: &'a RunOptions,
    model: ModelWeights,
    vocab: Vocabulary,
    dir: RunDir,
    manifest: RunManifest,
    ranking: Option<HeadRanking>,
    previous: Option<PathBuf>,
}

impl Ctx<'_> {
    fn dataset(&mut self, name: &str) -> Result<Vec<PairTokens>> {
        let p = self.opts.data_dir.join(name);
        if !p.exists() {
            return Err(Error::io(
                &p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found (run `generate` first)"),
            ));
        }
        let pairs = read_pairs(&p)?;
        self.manifest.datasets.insert(name.to_string(), FileEntry::of(&p)?);
        tokenize_all(&self.vocab, &pairs)
    }

    fn ranking(&mut self) -> Result<HeadRanking> {
        if let Some(r) = &self.ranking {
            return Ok(r.clone());
        }
        let source = self
            .opts
            .heads
            .clone()
            .or_else(|| self.previous.as_ref().map(|d| d.join(HEADS_FILE)).filter(|p| p.exists()))
            .ok_or_else(|| {
                Error::Dependency(
                    "no head ranking available: run the `heads` stage first or pass --heads".into(),
                )
            })?;
        let r = tables::read_heads_csv(&source)?;
        if r.len() != self.model.config.total_heads() {
            return Err(Error::Integrity(format!(
                "{} ranks {} heads, model has {}",
                source.display(),
                r.len(),
                self.model.config.total_heads()
            )));
        }
        self.manifest.datasets.insert(HEADS_FILE.into(), FileEntry::of(&source)?);
        self.ranking = Some(r.clone());
        Ok(r)
    }

    fn stage(&mut self, stage: Stage) -> Result<()> {
        let cfg = &self.opts.cfg.clone();
        match stage {
            Stage::Baseline => {
                let pairs = self.dataset(CORPUS_FILE)?;
                let rows = run_baseline(&self.model, &pairs, &TemplateName::ALL)?;
                self.manifest.effective_n.insert("baseline".into(), pairs.len());
                self.dir.write("baseline.csv", &tables::baseline_csv(&rows)?)?;
                let bars: Vec<_> = rows
                    .iter()
                    .map(|r| (r.template.to_string(), r.stats.mean, r.stats.ci_half_width))
                    .collect();
                self.dir.write(
                    "baseline.svg",
                    bar_chart("Baseline NES by template", "template", "mean NES (nats)", &bars).as_bytes(),
                )?;
            }
            Stage::Layers => {
                let pairs = self.dataset(DEV_FILE)?;
                let rows = run_layer_sweep(cfg, &self.model, &pairs)?;
                self.manifest.effective_n.insert("layers".into(), rows[0].stats.n);
                self.dir.write("layers.csv", &tables::layers_csv(&rows)?)?;
                let series = vec![Series {
                    name: "attn_out patch".into(),
                    points: rows
                        .iter()
                        .map(|r| (r.layer as f64, r.stats.mean, r.stats.ci_half_width))
                        .collect(),
                }];
                self.dir.write(
                    "layers.svg",
                    line_chart("Layer patching", "layer", "mean ΔNES (nats)", &series).as_bytes(),
                )?;
            }
            Stage::Heads => {
                let pairs = self.dataset(DEV_FILE)?;
                let sweep = run_head_sweep(cfg, &self.model, &pairs)?;
                let ranking = sweep.ranking(&self.model.config, |_| true)?;
                self.manifest.effective_n.insert("heads".into(), sweep.rows.len());
                self.dir.write(HEADS_FILE, &tables::heads_csv(&ranking)?)?;
                let bars: Vec<_> = ranking
                    .entries
                    .iter()
                    .take(24)
                    .map(|e| (e.head.to_string(), e.mean_delta_nes, e.ci_half_width))
                    .collect();
                self.dir.write(
                    "heads.svg",
                    bar_chart("Top heads by patching effect", "head", "mean ΔNES (nats)", &bars).as_bytes(),
                )?;
                match cross_form_jaccard(&self.model.config, &sweep, cfg.top_m) {
                    Ok(m) => {
                        self.dir.write("jaccard.csv", &tables::jaccard_csv(&m)?)?;
                        self.dir.write("top_sets.txt", tables::top_sets_text(&m).as_bytes())?;
                    }
                    Err(Error::Completeness(msg)) => {
                        warn!(%msg, "skipping per-form Jaccard");
                        self.manifest.notes.push(format!("jaccard skipped: {msg}"));
                    }
                    Err(e) => return Err(e),
                }
                self.ranking = Some(ranking);
            }
            Stage::Curves => {
                let ranking = self.ranking()?;
                let pairs = self.dataset(TEST_FILE)?;
                let points = run_ablation_rescue_curves(cfg, &self.model, &pairs, &ranking)?;
                self.manifest.effective_n.insert("curves".into(), pairs.len());
                self.dir.write("curves.csv", &tables::curves_csv(&points)?)?;
                let mut series = Vec::new();
                for cond in [CurveCondition::Ablated, CurveCondition::Rescued] {
                    series.push(Series {
                        name: cond.as_str().into(),
                        points: points
                            .iter()
                            .filter(|p| p.condition == cond)
                            .map(|p| (p.k as f64, p.stats.mean, p.stats.ci_half_width))
                            .collect(),
                    });
                }
                let mut ks: Vec<usize> = points.iter().map(|p| p.k).collect();
                ks.dedup();
                series.push(Series {
                    name: "random control (seed mean)".into(),
                    points: ks
                        .iter()
                        .map(|&k| {
                            let v: Vec<f64> = points
                                .iter()
                                .filter(|p| p.k == k && p.condition == CurveCondition::RandomControl)
                                .map(|p| p.stats.mean)
                                .collect();
                            (k as f64, v.iter().sum::<f64>() / v.len().max(1) as f64, None)
                        })
                        .collect(),
                });
                self.dir.write(
                    "curves.svg",
                    line_chart("Ablation and rescue", "k", "mean NES (nats)", &series).as_bytes(),
                )?;
            }
            Stage::Crossform => {
                let heads = top_k(&self.ranking()?, cfg.k)?;
                let pairs = self.dataset(TEST_FILE)?;
                let rows = run_cross_form(&self.model, &pairs, &heads)?;
                self.manifest.effective_n.insert("crossform".into(), pairs.len());
                self.dir.write("crossform.csv", &tables::crossform_csv(&rows)?)?;
                let bars: Vec<_> = rows
                    .iter()
                    .map(|r| (r.form.to_string(), r.stats.mean, r.stats.ci_half_width))
                    .collect();
                self.dir.write(
                    "crossform.svg",
                    bar_chart(&format!("ΔNES per form (k={})", cfg.k), "form", "mean ΔNES (nats)", &bars)
                        .as_bytes(),
                )?;
            }
            Stage::External => {
                let Some(ext) = &self.opts.external else {
                    return Err(Error::Argument("the external stage needs --pairs".into()));
                };
                let heads = top_k(&self.ranking()?, cfg.k)?;
                let records = load_external_pairs(
                    &ext.path,
                    &ext.affirmative_column,
                    &ext.negated_column,
                    ext.label_column.as_deref(),
                )?;
                self.manifest.datasets.insert("external".into(), FileEntry::of(&ext.path)?);
                let (kept, skipped) = align_external(&self.vocab, &records);
                for (row, e) in &skipped {
                    self.manifest.notes.push(format!("external row {row} skipped: {e}"));
                }
                if kept.is_empty() {
                    return Err(Error::EmptyInput("no external pair could be aligned".into()));
                }
                let pairs: Vec<PairTokens> = kept.into_iter().map(|p| p.tokens).collect();
                let r = run_external_validation(&self.model, &pairs, &heads)?;
                self.manifest.effective_n.insert("external".into(), pairs.len());
                self.manifest.effective_n.insert("external_records".into(), records.len());
                self.dir.write("external.csv", &tables::external_csv(&r)?)?;
                let bars = vec![
                    ("baseline".to_string(), r.baseline.mean, r.baseline.ci_half_width),
                    ("ablated".to_string(), r.ablated.mean, r.ablated.ci_half_width),
                    ("rescued".to_string(), r.rescued.mean, r.rescued.ci_half_width),
                ];
                self.dir.write(
                    "external.svg",
                    bar_chart(&format!("External pairs (k={})", cfg.k), "condition", "mean NES (nats)", &bars)
                        .as_bytes(),
                )?;
            }
            Stage::All => unreachable!("expanded before dispatch"),
        }
        Ok(())
    }
}

/// Runs one stage (or all) into a fresh run directory.
pub fn run(opts: &RunOptions) -> Result<RunOutcome> {
    let checkpoint = &opts.checkpoint;
    if !checkpoint.exists() {
        return Err(Error::io(
            checkpoint,
            std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found"),
        ));
    }
    let model = load_model(checkpoint, opts.model_config.as_deref())?;
    opts.cfg.validate(&model.config)?;
    let vocab = load_vocab(opts.vocab.as_ref().map(|(v, m)| (v.as_path(), m.as_path())))?;
    let previous = latest_run(&opts.out_root);

    let mut manifest = RunManifest::new(
        model.content_hash.clone(),
        serde_json::to_value(model.config)?,
        serde_json::to_value(&opts.cfg)?,
    );
    manifest.checkpoint = Some(FileEntry {
        path: checkpoint.display().to_string(),
        sha256: model.content_hash.clone(),
    });
    manifest.seeds.insert("experiment".into(), json!(opts.cfg.seed));
    manifest.seeds.insert("control".into(), json!(opts.cfg.control_seeds));
    let dm = opts.data_dir.join(DATASET_MANIFEST_FILE);
    if let Ok(text) = std::fs::read_to_string(&dm) {
        if let Ok(d) = serde_json::from_str::<DatasetManifest>(&text) {
            manifest.seeds.insert("corpus_and_split".into(), json!(d.seed));
        }
        manifest.datasets.insert(DATASET_MANIFEST_FILE.into(), FileEntry::of(&dm)?);
    }

    let mut ctx = Ctx {
        opts,
        model,
        vocab,
        dir: RunDir::create(&opts.out_root)?,
        manifest,
        ranking: None,
        previous,
    };
    for stage in opts.stage.expand() {
        if stage == Stage::External && opts.stage == Stage::All && opts.external.is_none() {
            ctx.manifest.notes.push("external stage skipped: no --pairs given".into());
            continue;
        }
        let t = Instant::now();
        info!(%stage, "stage start");
        if let Err(e) = ctx.stage(stage) {
            let _ = std::fs::remove_dir_all(ctx.dir.path());
            return Err(e);
        }
        ctx.manifest.stages.push(stage.to_string());
        ctx.manifest
            .stage_seconds
            .insert(stage.to_string(), t.elapsed().as_secs_f64());
    }
    let (run_dir, manifest) = ctx.dir.finish(ctx.manifest)?;
    Ok(RunOutcome { run_dir, manifest })
}

// ---------------------------------------------------------------- verify

/// Reference token ids for the parity corpus.
pub const TOKENIZER_PARITY_JSON: &str = include_str!("../data/tokenizer_parity.json");

#[derive(Debug, Deserialize)]
pub struct ParityCase {
    pub text: String,
    pub ids: Vec<u32>,
}

#[derive(Debug, Deserialize)]
struct ParityFile {
    cases: Vec<ParityCase>,
}

pub fn parity_cases() -> Vec<ParityCase> {
    serde_json::from_str::<ParityFile>(TOKENIZER_PARITY_JSON)
        .expect("bundled parity fixture is valid JSON")
        .cases
}

/// One named property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub checkpoint: PathBuf,
    pub model_config: Option<PathBuf>,
    pub vocab: Option<(PathBuf, PathBuf)>,
    /// Test pairs used by the null-patch check.
    pub null_pairs: usize,
    /// Inputs used by the decomposition check.
    pub decomposition_inputs: usize,
    pub seed: u64,
}

pub const NULL_PATCH_TOLERANCE: f64 = 1e-5;
pub const DECOMPOSITION_TOLERANCE: f32 = 1e-4;

/// Fresh `can_ability` test pairs drawn from a generated corpus.
pub fn sample_test_pairs(vocab: &Vocabulary, n: usize, seed: u64) -> Result<Vec<PairTokens>> {
    let corpus = generate_corpus(&Template::all(), crate::dataset::DEFAULT_TOTAL, seed)?;
    let (_, test) = build_can_ability_slice(
        &corpus,
        crate::dataset::DEFAULT_PER_FORM,
        crate::dataset::DEFAULT_DEV_SIZE,
        crate::dataset::DEFAULT_TEST_SIZE,
        seed,
    )?;
    tokenize_all(vocab, &test[..n.min(test.len())])
}

/// Max |Σ_h z_h·W_O[h] + b − attn_out| over every layer and position of
/// `tokens`, with each head's contribution summed separately in f64.
pub fn head_recomposition_error(model: &ModelWeights, tokens: &[u32]) -> Result<f32> {
    let cfg = &model.config;
    let (d, dh) = (cfg.d_model, cfg.d_head);
    let mut sites = Vec::new();
    for pos in 0..tokens.len() {
        sites.extend(HookSite::all_attention_sites(cfg, pos));
    }
    let run = model.forward_rows(tokens, &sites, &[], 0..0)?;
    let mut worst = 0.0f64;
    for pos in 0..tokens.len() {
        for layer in 0..cfg.n_layers {
            let w = &model.layers[layer];
            let mut sum: Vec<f64> = w.out_bias.iter().map(|&b| b as f64).collect();
            for head in 0..cfg.n_heads {
                let z = run.capture(&HookSite::head_slice(layer, head, pos))?;
                for (i, &zi) in z.iter().enumerate() {
                    let row = &w.out_weight[(head * dh + i) * d..(head * dh + i + 1) * d];
                    for (acc, &wij) in sum.iter_mut().zip(row) {
                        *acc += zi as f64 * wij as f64;
                    }
                }
            }
            let actual = run.capture(&HookSite::attn_out(layer, pos))?;
            for (a, &b) in sum.iter().zip(actual) {
                worst = worst.max((a - b as f64).abs());
            }
        }
    }
    Ok(worst as f32)
}

/// Max logit difference between patching every head slice and patching
/// every layer's `attn_out` with the affirmative cache.
pub fn patch_equivalence_error(model: &ModelWeights, pair: &PairTokens) -> Result<f32> {
    let cache = cache_affirmative(model, &pair.id, &pair.affirmative)?;
    let n = pair.negated.len();
    let all = HeadSet::new(HeadId::all(&model.config), HeadSetLabel::TopK)?;
    let heads = build_head_patches(&cache, &all, n)?;
    let layers = (0..model.config.n_layers)
        .map(|l| build_layer_patch(&cache, l, n))
        .collect::<Result<Vec<_>>>()?;
    let mut tokens = pair.negated.clone();
    tokens.extend(&pair.target);
    let rows = n - 1..tokens.len();
    let a = model.forward_rows(&tokens, &[], &heads, rows.clone())?;
    let b = model.forward_rows(&tokens, &[], &layers, rows)?;
    Ok(a.logits
        .data
        .iter()
        .zip(&b.logits.data)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f32::max))
}

/// Runs the property checks against a checkpoint. A checkpoint that fails
/// to load is an error, not a failed check.
pub fn verify(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let model = load_model(&opts.checkpoint, opts.model_config.as_deref())?;
    let vocab = load_vocab(opts.vocab.as_ref().map(|(v, m)| (v.as_path(), m.as_path())))?;
    let mut out = vec![CheckResult::new(
        "checkpoint",
        true,
        format!("{} parameters, sha256 {}", model.parameter_count(), model.content_hash),
    )];

    let cases = parity_cases();
    let mismatches: Vec<&str> = cases
        .iter()
        .filter(|c| vocab.encode_ids(&c.text) != c.ids)
        .map(|c| c.text.as_str())
        .collect();
    out.push(CheckResult::new(
        "tokenizer_parity",
        mismatches.is_empty(),
        format!("{}/{} strings match the reference ids {:?}", cases.len() - mismatches.len(), cases.len(), mismatches),
    ));
    let round_trip_failures = cases
        .iter()
        .filter(|c| vocab.decode(&vocab.encode_ids(&c.text)).ok().as_deref() != Some(c.text.as_str()))
        .count();
    out.push(CheckResult::new(
        "tokenizer_round_trip",
        round_trip_failures == 0,
        format!("{round_trip_failures} failures"),
    ));

    let pairs = sample_test_pairs(&vocab, opts.null_pairs.max(opts.decomposition_inputs), opts.seed)?;

    let probe: Vec<u32> = [pairs[0].negated.clone(), pairs[0].target.clone()].concat();
    let a = model.forward(&probe, &[], &[])?;
    let b = model.forward(&probe, &[], &[])?;
    let same = a.logits.data.iter().zip(&b.logits.data).all(|(x, y)| x.to_bits() == y.to_bits());
    out.push(CheckResult::new("determinism", same, "two identical passes compared bitwise".into()));

    let mut recompose = 0.0f32;
    let mut patch = 0.0f32;
    for p in pairs.iter().take(opts.decomposition_inputs) {
        let tokens = [p.negated.clone(), p.target.clone()].concat();
        recompose = recompose.max(head_recomposition_error(&model, &tokens)?);
        patch = patch.max(patch_equivalence_error(&model, p)?);
    }
    out.push(CheckResult::new(
        "head_decomposition",
        recompose < DECOMPOSITION_TOLERANCE,
        format!("max |Σ heads + b − attn_out| = {recompose:.3e} (limit {DECOMPOSITION_TOLERANCE:e})"),
    ));
    out.push(CheckResult::new(
        "patch_equivalence",
        patch < DECOMPOSITION_TOLERANCE,
        format!("max logit gap, all heads vs all layers = {patch:.3e} (limit {DECOMPOSITION_TOLERANCE:e})"),
    ));

    let drift = null_patch_drift(&model, &pairs[..opts.null_pairs.min(pairs.len())])?;
    out.push(CheckResult::new(
        "null_patch",
        drift < NULL_PATCH_TOLERANCE,
        format!("max |ΔNES| = {drift:.3e} over {} pairs (limit {NULL_PATCH_TOLERANCE:e})", opts.null_pairs),
    ));
    Ok(out)
}
