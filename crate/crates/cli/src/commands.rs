//! Subcommand implementations. Each returns a JSON summary for stdout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use cdsbench_core::analysis::{analyze as analyze_records, build_report, ManifestRef, REFERENCE_SOURCE, SUMMARY_FILE};
use cdsbench_core::analyzers::{AnalyzerError, DependencyParse, DependencyParser, Embedder, EmbeddingVector};
use cdsbench_core::backends::{Backend, BackendDescriptor, BackendKind, PlaybackFixture};
use cdsbench_core::corpus::{
    load_corpus_paths, read_benchmark_set, select_benchmark_set, write_benchmark_set, BenchmarkSet,
};
use cdsbench_core::lexicon::{
    bundled_concreteness_sample, bundled_function_words, ConcretenessLexicon, FunctionWordSet,
};
use cdsbench_core::metrics::{profile_all, read_records_csv, write_records_csv, Analyzers, MetricRecord};
use cdsbench_core::protocols::{
    execute, read_generated, write_generated, GeneratedCorpus, NamedBackend, RoleBackends, RunManifest,
    RunStore, GENERATED_FILE, MANIFEST_FILE,
};

use crate::config::{LoadedConfig, RunConfig, RunSpec};
use crate::error::{io_error, CliError, ErrorCode};

pub const CONFIG_COPY: &str = "config.toml";
pub const BENCHMARK_DIR: &str = "benchmark";
pub const RUNS_DIR: &str = "runs";
pub const RECORDED_DIR: &str = "recorded";
pub const REPLAY_DIR: &str = "replay";
pub const FIXTURES_DIR: &str = "fixtures";
pub const ANALYSIS_DIR: &str = "analysis";
pub const METRICS_FILE: &str = "metrics.csv";

/// Environment variable that pins manifest timestamps (reproducible outputs).
pub const EPOCH_ENV: &str = "SOURCE_DATE_EPOCH";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Copies the config text into the output directory. An existing copy must
/// match.
fn save_config_copy(loaded: &LoadedConfig) -> Result<(), CliError> {
    let out = &loaded.config.output_dir;
    create_dir(out)?;
    let path = out.join(CONFIG_COPY);
    if let Ok(existing) = fs::read_to_string(&path) {
        if existing != loaded.source_text {
            log::warn!("{} differs from the current config; overwriting", path.display());
        }
    }
    fs::write(&path, &loaded.source_text).map_err(|e| io_error(&path, e))
}

fn select(config: &RunConfig) -> Result<BenchmarkSet, CliError> {
    let all = load_corpus_paths(&config.corpus.paths, config.corpus.format)?;
    Ok(select_benchmark_set(&all, &config.corpus.ages, config.corpus.per_age)?)
}

pub fn ingest(loaded: &LoadedConfig) -> Result<Value, CliError> {
    let config = &loaded.config;
    let set = select(config)?;
    save_config_copy(loaded)?;
    let dir = config.output_dir.join(BENCHMARK_DIR);
    write_benchmark_set(&set, &dir)?;
    log::info!(
        "ingested {} conversations, {} pairs",
        set.stats.conversation_count,
        set.stats.pair_count
    );
    Ok(json!({
        "command": "ingest",
        "benchmark_dir": dir,
        "stats": set.stats,
    }))
}

/// The ingested set, ingesting first if it is absent.
fn benchmark(loaded: &LoadedConfig) -> Result<BenchmarkSet, CliError> {
    let dir = loaded.config.output_dir.join(BENCHMARK_DIR);
    if !dir.join(cdsbench_core::corpus::CONVERSATIONS_FILE).exists() {
        ingest(loaded)?;
    }
    Ok(read_benchmark_set(&dir)?)
}

fn runs_to_execute<'a>(config: &'a RunConfig, only: Option<&str>) -> Result<Vec<&'a RunSpec>, CliError> {
    match only {
        None => Ok(config.runs.iter().collect()),
        Some(name) => config
            .run(name)
            .map(|r| vec![r])
            .ok_or_else(|| CliError::new(ErrorCode::RunMissing, format!("no run named {name} in the config"))),
    }
}

fn pinned_timestamp() -> Option<u64> {
    std::env::var(EPOCH_ENV).ok().and_then(|v| v.trim().parse().ok())
}

/// The manifest for `spec`, with backend descriptors as given.
fn manifest_for(
    config: &RunConfig,
    spec: &RunSpec,
    child: NamedBackend,
    caregiver: NamedBackend,
    set: &BenchmarkSet,
) -> RunManifest {
    let mut m = RunManifest::new(
        &spec.name,
        spec.protocol,
        spec.direction,
        spec.shots,
        child,
        caregiver,
        config.providers.embedder.clone(),
        config.providers.parser.clone(),
        config.seed,
    );
    m.exemplar_k = spec.exemplars;
    m.max_turns = spec.max_turns;
    if let Some(ts) = pinned_timestamp() {
        m.timestamp = ts;
    }
    m.record_exclusions(&set.conversations);
    m
}

fn named(config: &RunConfig, name: &str) -> NamedBackend {
    NamedBackend {
        name: name.to_string(),
        descriptor: config.backend_descriptor(name),
    }
}

fn spec_backends(config: &RunConfig, spec: &RunSpec) -> (NamedBackend, NamedBackend) {
    let child = spec.child().expect("validated");
    let caregiver = spec.caregiver().expect("validated");
    (named(config, child), named(config, caregiver))
}

/// Builds each distinct backend once.
fn build_backends<'a>(
    pairs: impl IntoIterator<Item = &'a NamedBackend>,
    cache: &mut BTreeMap<String, Backend>,
) -> Result<(), CliError> {
    for nb in pairs {
        if !cache.contains_key(&nb.name) {
            cache.insert(nb.name.clone(), nb.descriptor.build(&nb.name)?);
        }
    }
    Ok(())
}

fn run_summary(name: &str, dir: &Path, corpus: &GeneratedCorpus) -> Value {
    let failures: usize = corpus.conversations.iter().map(|c| c.failures.len()).sum();
    let refusals: usize = corpus.conversations.iter().map(|c| c.refusals).sum();
    let truncated = corpus.conversations.iter().filter(|c| c.truncated).count();
    json!({
        "run": name,
        "dir": dir,
        "configuration": corpus.manifest.configuration(),
        "manifest_digest": corpus.manifest.digest(),
        "conversations": corpus.conversations.len(),
        "failures": failures,
        "refusals": refusals,
        "truncated": truncated,
    })
}

fn execute_into(
    dir: &Path,
    manifest: &RunManifest,
    set: &BenchmarkSet,
    child: &Backend,
    caregiver: &Backend,
    resumable: bool,
) -> Result<GeneratedCorpus, CliError> {
    let backends = RoleBackends { child, caregiver };
    let corpus = if resumable {
        let store = RunStore::open(dir, manifest)?;
        log::info!("{}: {} checkpoint(s) already complete", manifest.run_name, store.completed_parts());
        execute(manifest, &set.conversations, backends, Some(&store))?
    } else {
        create_dir(dir)?;
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            fs::remove_file(&path).map_err(|e| io_error(&path, e))?;
        }
        execute(manifest, &set.conversations, backends, None)?
    };
    write_generated(dir, &corpus)?;
    Ok(corpus)
}

pub fn run(loaded: &LoadedConfig, only: Option<&str>) -> Result<Value, CliError> {
    let config = &loaded.config;
    let specs = runs_to_execute(config, only)?;
    let set = benchmark(loaded)?;
    save_config_copy(loaded)?;
    let mut cache = BTreeMap::new();
    let mut summaries = Vec::new();
    for spec in specs {
        let (child, caregiver) = spec_backends(config, spec);
        build_backends([&child, &caregiver], &mut cache)?;
        let manifest = manifest_for(config, spec, child, caregiver, &set);
        let dir = config.output_dir.join(RUNS_DIR).join(&spec.name);
        log::info!("run {} ({}) started", spec.name, manifest.configuration());
        let corpus = execute_into(
            &dir,
            &manifest,
            &set,
            &cache[&manifest.child_backend.name],
            &cache[&manifest.caregiver_backend.name],
            true,
        )?;
        log::info!("run {} finished: {} conversations", spec.name, corpus.conversations.len());
        summaries.push(run_summary(&spec.name, &dir, &corpus));
    }
    Ok(json!({ "command": "run", "runs": summaries }))
}

pub fn fixture_path(config: &RunConfig, run: &str) -> PathBuf {
    config.output_dir.join(FIXTURES_DIR).join(format!("{run}.jsonl"))
}

/// Executes one run against recording wrappers and saves every completion.
pub fn record(loaded: &LoadedConfig, run_name: &str) -> Result<Value, CliError> {
    let config = &loaded.config;
    let spec = runs_to_execute(config, Some(run_name))?[0];
    let set = benchmark(loaded)?;
    save_config_copy(loaded)?;
    let (child, caregiver) = spec_backends(config, spec);
    let mut cache = BTreeMap::new();
    build_backends([&child, &caregiver], &mut cache)?;
    let mut recorders = BTreeMap::new();
    let mut handles = Vec::new();
    for (name, backend) in cache {
        let (rec, handle) = backend.recording();
        recorders.insert(name, rec);
        handles.push(handle);
    }
    let manifest = manifest_for(config, spec, child, caregiver, &set);
    let dir = config.output_dir.join(RECORDED_DIR).join(&spec.name);
    let corpus = execute_into(
        &dir,
        &manifest,
        &set,
        &recorders[&manifest.child_backend.name],
        &recorders[&manifest.caregiver_backend.name],
        false,
    )?;
    let mut fixture = PlaybackFixture::default();
    for h in handles {
        let part = std::mem::take(&mut *h.lock().expect("recorder lock"));
        fixture.extend(part)?;
    }
    let path = fixture_path(config, &spec.name);
    create_dir(path.parent().expect("has parent"))?;
    fixture.save(&path)?;
    let mut summary = run_summary(&spec.name, &dir, &corpus);
    summary["fixture"] = json!(path);
    summary["fixture_entries"] = json!(fixture.len());
    Ok(json!({ "command": "record", "runs": [summary] }))
}

/// Re-executes one run with playback backends of the same names.
pub fn replay(loaded: &LoadedConfig, run_name: &str, fixture: Option<&Path>) -> Result<Value, CliError> {
    let config = &loaded.config;
    let spec = runs_to_execute(config, Some(run_name))?[0];
    let path = fixture.map(Path::to_path_buf).unwrap_or_else(|| fixture_path(config, run_name));
    if !path.exists() {
        return Err(CliError::new(
            ErrorCode::RunMissing,
            format!("fixture {} not found; run `record --run {run_name}` first", path.display()),
        ));
    }
    let set = benchmark(loaded)?;
    let playback = |name: &str| NamedBackend {
        name: name.to_string(),
        descriptor: BackendDescriptor {
            fixture: Some(path.clone()),
            ..BackendDescriptor::of_kind(BackendKind::Playback)
        },
    };
    let child = playback(spec.child().expect("validated"));
    let caregiver = playback(spec.caregiver().expect("validated"));
    let mut cache = BTreeMap::new();
    build_backends([&child, &caregiver], &mut cache)?;
    let manifest = manifest_for(config, spec, child, caregiver, &set);
    let dir = config.output_dir.join(REPLAY_DIR).join(&spec.name);
    let corpus = execute_into(
        &dir,
        &manifest,
        &set,
        &cache[&manifest.child_backend.name],
        &cache[&manifest.caregiver_backend.name],
        false,
    )?;
    Ok(json!({ "command": "replay", "runs": [run_summary(&spec.name, &dir, &corpus)] }))
}

/// Stand-in for a provider that could not be built; every call fails, so
/// the affected metrics come out undefined.
struct Unavailable {
    id: String,
    reason: String,
}

impl Unavailable {
    fn error(&self) -> AnalyzerError {
        AnalyzerError::ProviderUnavailable {
            provider: self.id.clone(),
            attempts: 0,
            message: self.reason.clone(),
        }
    }
}

impl Embedder for Unavailable {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_batch(&self, _texts: &[String]) -> Result<Vec<EmbeddingVector>, AnalyzerError> {
        Err(self.error())
    }
}

impl DependencyParser for Unavailable {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse_heads(&self, _tokens: &[String]) -> Result<DependencyParse, AnalyzerError> {
        Err(self.error())
    }
}

struct Tools {
    lexicon: ConcretenessLexicon,
    function_words: FunctionWordSet,
    embedder: Arc<dyn Embedder>,
    parser: Arc<dyn DependencyParser>,
    warnings: Vec<String>,
}

impl Tools {
    fn load(config: &RunConfig) -> Result<Self, CliError> {
        let mut warnings = Vec::new();
        let lexicon = match &config.lexicon.concreteness {
            Some(p) => ConcretenessLexicon::from_path(p)?,
            None => {
                warnings.push(
                    "concreteness uses the bundled illustrative sample table, not a published norm set".into(),
                );
                bundled_concreteness_sample()
            }
        };
        let function_words = match &config.lexicon.function_words {
            Some(p) => FunctionWordSet::from_path(p)?,
            None => bundled_function_words(),
        };
        let embedder: Arc<dyn Embedder> = match config.providers.embedder.build() {
            Ok(e) => e,
            Err(e) => {
                let msg = format!("embedder {} unavailable ({e}); alignment and diversity are undefined", config.providers.embedder.name);
                log::warn!("{msg}");
                warnings.push(msg);
                Arc::new(Unavailable {
                    id: config.providers.embedder.name.clone(),
                    reason: e.to_string(),
                })
            }
        };
        let parser: Arc<dyn DependencyParser> = match config.providers.parser.build() {
            Ok(p) => p,
            Err(e) => {
                let msg = format!("parser {} unavailable ({e}); syntactic depth is undefined", config.providers.parser.name);
                log::warn!("{msg}");
                warnings.push(msg);
                Arc::new(Unavailable {
                    id: config.providers.parser.name.clone(),
                    reason: e.to_string(),
                })
            }
        };
        Ok(Self {
            lexicon,
            function_words,
            embedder,
            parser,
            warnings,
        })
    }

    fn analyzers(&self) -> Analyzers<'_> {
        Analyzers {
            lexicon: &self.lexicon,
            function_words: &self.function_words,
            parser: self.parser.as_ref(),
            embedder: self.embedder.as_ref(),
        }
    }
}

/// Metric records for the generated speech of one run.
pub fn generated_records(corpus: &GeneratedCorpus, tools: &Analyzers<'_>, source: &str) -> Vec<MetricRecord> {
    let convs: Vec<_> = corpus.conversations.iter().map(|g| g.conversation.clone()).collect();
    let records = profile_all(&convs, tools, source);
    records
        .chunks(2)
        .zip(&corpus.conversations)
        .flat_map(|(pair, g)| {
            let roles = g.evaluated_roles();
            pair.iter().filter(move |r| roles.contains(&r.role)).cloned().collect::<Vec<_>>()
        })
        .collect()
}

/// Where `analyze` looks for generated corpora and where it writes.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub runs_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

fn read_warnings(summary: &Path) -> Vec<String> {
    fs::read_to_string(summary)
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .and_then(|v| serde_json::from_value(v["warnings"].clone()).ok())
        .unwrap_or_default()
}

fn write_metrics(path: &Path, records: &[MetricRecord]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    write_records_csv(std::io::BufWriter::new(file), records)
        .map_err(|e| CliError::new(ErrorCode::AnalysisFailed, e.to_string()))
}

fn report_from(
    config: &RunConfig,
    records: &[MetricRecord],
    manifests: Vec<ManifestRef>,
    warnings: Vec<String>,
    out: &Path,
) -> Result<Value, CliError> {
    let report = analyze_records(records, manifests, config.analysis.n_boot, config.seed, warnings)?;
    build_report(&report, out)?;
    Ok(json!({
        "aggregate_rows": report.summary.aggregate_rows,
        "regression_rows": report.summary.regression_rows,
        "warnings": report.summary.warnings,
        "notes": report.summary.notes.len(),
    }))
}

pub fn analyze(loaded: &LoadedConfig, opts: &AnalyzeOptions) -> Result<Value, CliError> {
    let config = &loaded.config;
    let set = benchmark(loaded)?;
    let tools = Tools::load(config)?;
    let analyzers = tools.analyzers();
    let mut warnings = tools.warnings.clone();

    let mut records = profile_all(&set.conversations, &analyzers, REFERENCE_SOURCE);
    let runs_dir = opts.runs_dir.clone().unwrap_or_else(|| config.output_dir.join(RUNS_DIR));
    let mut manifests = Vec::new();
    let mut used: BTreeMap<String, String> = BTreeMap::new();
    for spec in &config.runs {
        let dir = runs_dir.join(&spec.name);
        if !dir.join(GENERATED_FILE).exists() {
            warnings.push(format!("run {} has no generated corpus in {}", spec.name, runs_dir.display()));
            continue;
        }
        let corpus = read_generated(&dir)?;
        let mut source = corpus.manifest.configuration();
        if used.contains_key(&source) {
            source = format!("{source}@{}", spec.name);
        }
        used.insert(source.clone(), spec.name.clone());
        records.extend(generated_records(&corpus, &analyzers, &source));
        manifests.push(ManifestRef {
            configuration: source,
            digest: corpus.manifest.digest(),
        });
    }

    let out = opts.out_dir.clone().unwrap_or_else(|| config.output_dir.join(ANALYSIS_DIR));
    create_dir(&out)?;
    write_metrics(&out.join(METRICS_FILE), &records)?;
    fs::write(out.join("manifests.json"), serde_json::to_string_pretty(&manifests).expect("serializes") + "\n")
        .map_err(|e| io_error(&out, e))?;
    let mut summary = report_from(config, &records, manifests, warnings, &out)?;
    summary["command"] = json!("analyze");
    summary["records"] = json!(records.len());
    summary["out_dir"] = json!(out);
    Ok(summary)
}

/// Rebuilds report files from an existing `metrics.csv`.
pub fn report(loaded: &LoadedConfig, out_dir: Option<&Path>) -> Result<Value, CliError> {
    let config = &loaded.config;
    let out = out_dir.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.join(ANALYSIS_DIR));
    let path = out.join(METRICS_FILE);
    let file = fs::File::open(&path).map_err(|_| {
        CliError::new(ErrorCode::RunMissing, format!("{} not found; run `analyze` first", path.display()))
    })?;
    let records = read_records_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::new(ErrorCode::AnalysisFailed, e.to_string()))?;
    let manifests: Vec<ManifestRef> = fs::read_to_string(out.join("manifests.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let warnings = read_warnings(&out.join(SUMMARY_FILE));
    let mut summary = report_from(config, &records, manifests, warnings, &out)?;
    summary["command"] = json!("report");
    summary["records"] = json!(records.len());
    Ok(summary)
}
