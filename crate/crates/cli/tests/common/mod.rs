#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mini")
}

/// Copies the bundled mini-corpus and its config into a fresh directory.
pub fn mini_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["config.toml", "corpus.jsonl"] {
        std::fs::copy(mini_dir().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

pub fn audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audit"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("audit binary runs")
}

pub fn audit_in(dir: &Path, stage: &str, extra: &[&str]) -> Output {
    let config = dir.join("config.toml");
    let mut args = vec![stage, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    audit(&args)
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
