#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub fn core_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn chat_dir() -> PathBuf {
    core_fixtures().join("chat")
}

/// Writes `cdsbench.toml` into `dir` with the fixture corpus, a parrot and a
/// shuffled backend, followed by `extra`.
pub fn write_config(dir: &Path, per_age: usize, extra: &str) -> PathBuf {
    let chat = chat_dir();
    let text = format!(
        r#"seed = 11
output_dir = "out"

[corpus]
paths = ["{chat}"]
per_age = {per_age}

[backends.parrot]
kind = "parrot"

[backends.shuffled]
kind = "shuffled"
fixture = "{chat}"

[analysis]
n_boot = 200
{extra}"#,
        chat = chat.display()
    );
    let path = dir.join("cdsbench.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn run_block(name: &str, protocol: &str, shots: &str, backend: &str) -> String {
    format!("\n[[runs]]\nname = \"{name}\"\nprotocol = \"{protocol}\"\nshots = \"{shots}\"\nbackend = \"{backend}\"\n")
}

pub fn cli(config: &Path, args: &[&str]) -> serde_json::Value {
    let mut argv = vec!["cdsbench".to_string(), "-c".into(), config.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let out = cdsbench_cli::run_cli(argv).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    serde_json::from_str(&out).unwrap()
}

/// Every file under `dir`, relative path → bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
