mod common;

use std::fs;
use std::process::Command;

use common::{cli, run_block, write_config};

fn bin(config: &std::path::Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cdsbench"))
        .arg("-c")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn error_code(stderr: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

#[test]
fn missing_corpus_exits_with_corpus_not_found() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, "output_dir = \"out\"\n[corpus]\npaths = [\"nowhere\"]\n").unwrap();
    let (code, err) = bin(&path, &["ingest"]);
    assert_eq!(code, 4);
    assert_eq!(error_code(&err), "CORPUS_NOT_FOUND");
    assert!(!tmp.path().join("out").exists(), "nothing written before validation");
}

#[test]
fn unknown_config_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 5, "[analysis_extra]\nx = 1\n");
    let (code, err) = bin(&path, &["ingest"]);
    assert_eq!(code, 3);
    assert_eq!(error_code(&err), "CONFIG_INVALID");
}

#[test]
fn usage_errors_and_help() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 5, "");
    let (code, err) = bin(&path, &["frobnicate"]);
    assert_eq!(code, 2);
    assert_eq!(error_code(&err), "USAGE");
    let (code, _) = bin(&path, &["--help"]);
    assert_eq!(code, 0);
    let (code, err) = bin(&path, &["replay"]);
    assert_eq!((code, error_code(&err).as_str()), (2, "USAGE"));
}

#[test]
fn insufficient_data_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 50, "");
    let (code, err) = bin(&path, &["ingest"]);
    assert_eq!(code, 6);
    assert_eq!(error_code(&err), "INSUFFICIENT_DATA");
}

#[test]
fn ingest_stats_follow_pair_law() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 5, "");
    let v = cli(&path, &["ingest"]);
    let stats = &v["stats"];
    assert_eq!(stats["conversation_count"], 20);
    let set = cdsbench_core::corpus::read_benchmark_set(&tmp.path().join("out/benchmark")).unwrap();
    let law: usize = set.conversations.iter().map(|c| c.len() - 1).sum();
    assert_eq!(stats["pair_count"].as_u64().unwrap() as usize, law);
    assert!(tmp.path().join("out/benchmark/stats.csv").exists());
    assert_eq!(fs::read_to_string(tmp.path().join("out/config.toml")).unwrap(), fs::read_to_string(&path).unwrap());
}

#[test]
fn reference_only_analysis_has_no_regressions() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 3, "");
    let v = cli(&path, &["analyze"]);
    assert_eq!(v["regression_rows"], 0);
    let aggregates = fs::read_dir(tmp.path().join("out/analysis/aggregates")).unwrap().count();
    assert_eq!(aggregates, 12);
    let reg = fs::read_to_string(tmp.path().join("out/analysis/regressions.csv")).unwrap();
    assert_eq!(reg.lines().count(), 1);
}

#[test]
fn few_shot_manifest_records_exclusions_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 2, &run_block("p", "single", "few", "parrot"));
    cli(&path, &["run"]);
    let dir = tmp.path().join("out/runs/p");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let excluded = manifest["excluded_pairs"].as_object().unwrap();
    assert_eq!(excluded.len(), 8);
    assert!(excluded.values().all(|v| v == &serde_json::json!([0, 1, 2])));
    assert_eq!(manifest["exemplar_k"], 3);

    let first = fs::read(dir.join("generated.jsonl")).unwrap();
    cli(&path, &["run", "--run", "p"]);
    assert_eq!(fs::read(dir.join("generated.jsonl")).unwrap(), first);
}

#[test]
fn changed_run_settings_refuse_to_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 2, &run_block("p", "single", "zero", "parrot"));
    cli(&path, &["run"]);
    let path = write_config(tmp.path(), 2, &run_block("p", "single", "few", "parrot"));
    let (code, err) = bin(&path, &["run"]);
    assert_eq!((code, error_code(&err).as_str()), (10, "RUN_FAILED"));
}

#[test]
fn unavailable_embedder_leaves_dialogue_measures_undefined() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "[providers.embedder]\nkind = \"http\"\nendpoint = \"http://127.0.0.1:9/embed\"\nmodel = \"m\"\napi_key_env = \"CDSBENCH_TEST_UNSET_KEY\"\n";
    let path = write_config(tmp.path(), 2, extra);
    let v = cli(&path, &["analyze"]);
    let warnings = v["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("embedder")), "{warnings:?}");
    let csv = fs::read_to_string(tmp.path().join("out/analysis/metrics.csv")).unwrap();
    let records = cdsbench_core::metrics::read_records_csv(csv.as_bytes()).unwrap();
    use cdsbench_core::metrics::{Measure, UndefinedReason};
    assert!(records
        .iter()
        .all(|r| r.get(Measure::DialogueAlignment).reason() == Some(UndefinedReason::ProviderFailure)));
    assert!(records.iter().all(|r| r.get(Measure::UtteranceLength).value().is_some()));
}

#[test]
fn eight_configurations_give_eight_rows_per_measure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut extra = String::new();
    for backend in ["parrot", "shuffled"] {
        for shots in ["zero", "few"] {
            for protocol in ["single", "multi"] {
                extra += &run_block(&format!("{backend}-{shots}-{protocol}"), protocol, shots, backend);
            }
        }
    }
    let path = write_config(tmp.path(), 2, &extra);
    cli(&path, &["run"]);
    cli(&path, &["analyze"]);
    let text = fs::read_to_string(tmp.path().join("out/analysis/regressions.csv")).unwrap();
    let mut rdr = csv_rows(&text);
    rdr.retain(|r| r[0] == "utterance_length" && r[1] == "caregiver");
    assert_eq!(rdr.len(), 8);
}

#[test]
fn report_rebuilds_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), 2, &run_block("p", "multi", "zero", "parrot"));
    cli(&path, &["run"]);
    cli(&path, &["analyze"]);
    let analysis = tmp.path().join("out/analysis");
    let before = common::snapshot(&analysis);
    cli(&path, &["report"]);
    assert_eq!(common::snapshot(&analysis), before);
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}
