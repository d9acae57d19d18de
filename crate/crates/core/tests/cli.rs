// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn negascope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negascope"))
        .args(args)
        .current_dir(dir)
        .env_remove("NEGASCOPE_HOME")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny(dir: &Path) {
    let o = negascope(dir, &["synth-weights", "--tiny", "--seed", "1", "--out", "model"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn generate_twice_gives_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = negascope(dir.path(), &["generate", "--total", "10", "--seed", "1", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let manifest = |d: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(d).join("dataset_manifest.json")).unwrap())
            .unwrap()
    };
    let (a, b) = (manifest("a"), manifest("b"));
    assert_eq!(a["file_hashes"], b["file_hashes"]);
    assert_eq!(a["total"], 10);
    for f in ["corpus.csv", "can_ability_dev.csv", "can_ability_test.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn negative_total_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&negascope(dir.path(), &["generate", "--total", "-1"])), 2);
    assert_eq!(code(&negascope(dir.path(), &["generate", "--total=-1"])), 2);
    assert_eq!(code(&negascope(dir.path(), &["run", "--stage", "everything"])), 2);
}

#[test]
fn missing_checkpoint_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = negascope(dir.path(), &["run", "--stage", "baseline", "--checkpoint", "nowhere.safetensors"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("nowhere.safetensors"));
}

#[test]
fn missing_dataset_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    let o = negascope(
        dir.path(),
        &[
            "run", "--stage", "baseline", "--checkpoint", "model/model.safetensors", "--data", "empty",
            "--k-values", "1,2", "--k", "2", "--top-m", "2",
        ],
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("corpus.csv"), "{}", stderr(&o));
    assert!(!dir.path().join("latest").exists());
}

#[test]
fn curves_without_heads_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    assert_eq!(code(&negascope(dir.path(), &["generate", "--total", "200", "--out", "data"])), 0);
    let o = negascope(
        dir.path(),
        &["run", "--stage", "curves", "--checkpoint", "model/model.safetensors", "--k-values", "1,2", "--k", "2", "--top-m", "2"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dependency"), "{}", stderr(&o));
    // the failed run leaves nothing behind
    let runs = dir.path().join("runs");
    assert!(!runs.exists() || std::fs::read_dir(runs).unwrap().next().is_none());
}

#[test]
fn k_beyond_head_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    assert_eq!(code(&negascope(dir.path(), &["generate", "--total", "200", "--out", "data"])), 0);
    let o = negascope(dir.path(), &["run", "--stage", "heads", "--checkpoint", "model/model.safetensors"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn verify_passes_on_a_healthy_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    let o = negascope(
        dir.path(),
        &["verify", "--checkpoint", "model/model.safetensors", "--null-pairs", "20", "--decomposition-inputs", "3"],
    );
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{out}{}", stderr(&o));
    for check in ["tokenizer_parity", "tokenizer_round_trip", "determinism", "head_decomposition", "patch_equivalence", "null_patch"] {
        assert!(out.contains(&format!("PASS {check}")), "{out}");
    }
}

#[test]
fn verify_reports_a_corrupted_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    tiny(dir.path());
    let p = dir.path().join("model/model.safetensors");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() / 2);
    std::fs::write(&p, bytes).unwrap();
    let o = negascope(dir.path(), &["verify", "--checkpoint", "model/model.safetensors"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("error"), "{}", stderr(&o));
}

#[test]
fn negascope_home_roots_relative_paths() {
    let home = tempfile::tempdir().unwrap();
    let cwd = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_negascope"))
        .args(["generate", "--total", "16"])
        .current_dir(cwd.path())
        .env("NEGASCOPE_HOME", home.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(home.path().join("data/corpus.csv").exists());
    assert!(!cwd.path().join("data").exists());
}
