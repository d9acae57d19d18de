// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use negascope::dataset::{DEFAULT_DEV_SIZE, DEFAULT_PER_FORM, DEFAULT_TEST_SIZE, DEFAULT_TOTAL};
use negascope::experiments::ExperimentConfig;
use negascope::model::synth::{synthetic_weights, tiny_config};
use negascope::model::ModelConfig;
use negascope::pipeline::{self, ExternalInput, GenerateOptions, RunOptions, Stage, VerifyOptions};
use negascope::{Error, Result};

/// Negation circuit analysis for GPT-2 Small.
///
/// Relative default paths are rooted at `$NEGASCOPE_HOME` when it is set.
#[derive(Parser, Debug)]
#[command(name = "negascope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the template corpus and the can_ability dev/test splits.
    Generate(GenerateArgs),
    /// Run one experiment stage (or all of them) into a new run directory.
    Run(Box<RunArgs>),
    /// Check tokenizer parity, determinism, head decomposition and null patching.
    Verify(VerifyArgs),
    /// Write a seeded random checkpoint with a GPT-2 layout (for testing).
    SynthWeights(SynthArgs),
}

#[derive(Args, Debug)]
struct VocabArgs {
    /// GPT-2 vocab.json; the bundled vocabulary is used when omitted.
    #[arg(long, requires = "merges")]
    vocab: Option<PathBuf>,
    /// GPT-2 merges.txt.
    #[arg(long, requires = "vocab")]
    merges: Option<PathBuf>,
}

impl VocabArgs {
    fn files(&self) -> Option<(PathBuf, PathBuf)> {
        Some((pipeline::resolve(self.vocab.as_ref()?), pipeline::resolve(self.merges.as_ref()?)))
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// safetensors checkpoint.
    #[arg(long, default_value = "gpt2/model.safetensors")]
    checkpoint: PathBuf,
    /// Hugging Face style config.json; defaults to one beside the checkpoint,
    /// else GPT-2 Small.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value = "data")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOTAL)]
    total: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PER_FORM)]
    per_form: usize,
    #[arg(long, default_value_t = DEFAULT_DEV_SIZE)]
    dev_size: usize,
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
    test_size: usize,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// baseline, layers, heads, curves, crossform, external or all.
    #[arg(long, default_value = "all")]
    stage: Stage,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    vocab: VocabArgs,
    /// Directory written by `generate`.
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Output root; runs go to `<out>/runs/<timestamp>`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// External affirmative/negated pair CSV.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, default_value = "sentence1")]
    affirmative_column: String,
    #[arg(long, default_value = "sentence2")]
    negated_column: String,
    #[arg(long)]
    label_column: Option<String>,
    /// heads.csv to reuse instead of the latest run's.
    #[arg(long)]
    heads: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    k_values: Vec<usize>,
    /// k for cross-form and external validation.
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    control_seeds: Vec<u64>,
    /// Deterministic per-sweep cap on examples.
    #[arg(long)]
    subsample: Option<usize>,
    /// Size of the per-form head sets compared by Jaccard similarity.
    #[arg(long, default_value_t = 10)]
    top_m: usize,
    /// Worker threads (default: all cores).
    #[arg(long, env = "NEGASCOPE_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    vocab: VocabArgs,
    #[arg(long, default_value_t = 100)]
    null_pairs: usize,
    #[arg(long, default_value_t = 10)]
    decomposition_inputs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, env = "NEGASCOPE_JOBS")]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for model.safetensors and config.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Three-layer, four-head model instead of the GPT-2 Small shape.
    #[arg(long)]
    tiny: bool,
}

fn init_threads(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Argument("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let m = pipeline::generate(&GenerateOptions {
        out_dir: pipeline::resolve(&a.out),
        total: a.total,
        seed: a.seed,
        per_form: a.per_form,
        dev_size: a.dev_size,
        test_size: a.test_size,
    })?;
    println!(
        "wrote {} pairs ({} dev, {} test) to {}",
        m.total,
        m.dev_size,
        m.test_size,
        pipeline::resolve(&a.out).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(a: RunArgs) -> Result<ExitCode> {
    init_threads(a.jobs)?;
    let cfg = ExperimentConfig {
        seed: a.seed,
        k_values: a.k_values,
        k: a.k,
        control_seeds: a.control_seeds,
        subsample: a.subsample,
        top_m: a.top_m,
        dev_path: Some(pipeline::resolve(&a.data).join(pipeline::DEV_FILE)),
        test_path: Some(pipeline::resolve(&a.data).join(pipeline::TEST_FILE)),
        checkpoint_path: Some(pipeline::resolve(&a.model.checkpoint)),
    };
    let external = a.pairs.as_ref().map(|p| ExternalInput {
        path: pipeline::resolve(p),
        affirmative_column: a.affirmative_column.clone(),
        negated_column: a.negated_column.clone(),
        label_column: a.label_column.clone(),
    });
    let out = pipeline::run(&RunOptions {
        stage: a.stage,
        checkpoint: pipeline::resolve(&a.model.checkpoint),
        model_config: a.model.model_config.as_deref().map(pipeline::resolve),
        vocab: a.vocab.files(),
        data_dir: pipeline::resolve(&a.data),
        external,
        heads: a.heads.as_deref().map(pipeline::resolve),
        out_root: pipeline::resolve(&a.out),
        cfg,
    })?;
    for note in &out.manifest.notes {
        println!("note: {note}");
    }
    for f in &out.manifest.outputs {
        println!("{}  {}", f.sha256, f.path);
    }
    println!("run directory: {}", out.run_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    init_threads(a.jobs)?;
    let checks = pipeline::verify(&VerifyOptions {
        checkpoint: pipeline::resolve(&a.model.checkpoint),
        model_config: a.model.model_config.as_deref().map(pipeline::resolve),
        vocab: a.vocab.files(),
        null_pairs: a.null_pairs,
        decomposition_inputs: a.decomposition_inputs,
        seed: a.seed,
    })?;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    let config = if a.tiny { tiny_config() } else { ModelConfig::gpt2_small() };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    let w = synthetic_weights(config, a.seed)?;
    let hash = w.save(a.out.join("model.safetensors"))?;
    let cfg_path = a.out.join("config.json");
    let text = serde_json::to_string_pretty(&config.to_hf_json())? + "\n";
    std::fs::write(&cfg_path, text).map_err(|e| Error::Io { path: cfg_path, source: e })?;
    println!("{hash}  {}", a.out.join("model.safetensors").display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(*a),
        Command::Verify(a) => verify(a),
        Command::SynthWeights(a) => synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
