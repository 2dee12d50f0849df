//! The declarative run configuration (TOML). Secrets never live here; HTTP
//! providers and backends name an environment variable instead.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cdsbench_core::analysis::DEFAULT_BOOTSTRAP;
use cdsbench_core::analyzers::{EmbedderDescriptor, EmbedderKind, ParserDescriptor, ParserKind};
use cdsbench_core::backends::{BackendDescriptor, BackendKind, Shots};
use cdsbench_core::corpus::CorpusFormat;
use cdsbench_core::protocols::{Direction, Protocol, DEFAULT_EXEMPLARS, DEFAULT_MAX_TURNS};

use crate::error::{CliError, ErrorCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub lexicon: LexiconConfig,
    #[serde(default)]
    pub providers: ProvidersConfig,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendDescriptor>,
    #[serde(default)]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub format: CorpusFormat,
    /// Age buckets in whole years.
    #[serde(default = "default_ages")]
    pub ages: Vec<u32>,
    #[serde(default = "default_per_age")]
    pub per_age: usize,
}

fn default_ages() -> Vec<u32> {
    vec![2, 3, 4, 5]
}
fn default_per_age() -> usize {
    10
}

/// Unset paths fall back to the bundled lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    #[serde(default)]
    pub concreteness: Option<PathBuf>,
    #[serde(default)]
    pub function_words: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    #[serde(default = "EmbedderDescriptor::fallback")]
    pub embedder: EmbedderDescriptor,
    #[serde(default = "ParserDescriptor::fallback")]
    pub parser: ParserDescriptor,
}

impl Default for ProvidersConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderDescriptor::fallback(),
            parser: ParserDescriptor::fallback(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub protocol: Protocol,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_shots")]
    pub shots: Shots,
    /// Backend for both roles unless overridden below.
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub child_backend: Option<String>,
    #[serde(default)]
    pub caregiver_backend: Option<String>,
    #[serde(default = "default_max_turns")]
    pub max_turns: usize,
    #[serde(default = "default_exemplars")]
    pub exemplars: usize,
}

fn default_direction() -> Direction {
    Direction::Both
}
fn default_shots() -> Shots {
    Shots::Zero
}
fn default_max_turns() -> usize {
    DEFAULT_MAX_TURNS
}
fn default_exemplars() -> usize {
    DEFAULT_EXEMPLARS
}

impl RunSpec {
    pub fn child(&self) -> Option<&str> {
        self.child_backend.as_deref().or(self.backend.as_deref())
    }

    pub fn caregiver(&self) -> Option<&str> {
        self.caregiver_backend.as_deref().or(self.backend.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
}

fn default_n_boot() -> usize {
    DEFAULT_BOOTSTRAP
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { n_boot: DEFAULT_BOOTSTRAP }
    }
}

/// A parsed config plus its source text (copied verbatim into outputs).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source_text: String,
    pub path: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::new(ErrorCode::ConfigInvalid, msg)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    /// Makes every relative path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        self.corpus.paths.iter_mut().for_each(|p| resolve(base, p));
        for p in [&mut self.lexicon.concreteness, &mut self.lexicon.function_words].into_iter().flatten() {
            resolve(base, p);
        }
        if let Some(p) = &mut self.providers.parser.path {
            resolve(base, p);
        }
        for d in self.backends.values_mut() {
            if let Some(p) = &mut d.fixture {
                resolve(base, p);
            }
        }
    }

    /// Checks everything that can be checked without network access or
    /// writing files.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir is empty"));
        }
        if self.corpus.paths.is_empty() {
            return Err(invalid("corpus.paths is empty"));
        }
        for p in &self.corpus.paths {
            if !p.exists() {
                return Err(CliError::new(
                    ErrorCode::CorpusNotFound,
                    format!("corpus path {} does not exist", p.display()),
                ));
            }
        }
        if self.corpus.ages.is_empty() {
            return Err(invalid("corpus.ages is empty"));
        }
        if self.analysis.n_boot == 0 {
            return Err(invalid("analysis.n_boot must be at least 1"));
        }
        for p in [&self.lexicon.concreteness, &self.lexicon.function_words].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::new(
                    ErrorCode::LexiconInvalid,
                    format!("lexicon file {} does not exist", p.display()),
                ));
            }
        }
        let e = &self.providers.embedder;
        if e.kind == EmbedderKind::Http && (e.endpoint.is_none() || e.model.is_none()) {
            return Err(CliError::new(ErrorCode::ProviderInvalid, "http embedder needs endpoint and model"));
        }
        let p = &self.providers.parser;
        match p.kind {
            ParserKind::Http if p.endpoint.is_none() => {
                return Err(CliError::new(ErrorCode::ProviderInvalid, "http parser needs an endpoint"))
            }
            ParserKind::Golden if !p.path.as_ref().is_some_and(|x| x.exists()) => {
                return Err(CliError::new(ErrorCode::ProviderInvalid, "golden parser needs an existing path"))
            }
            _ => {}
        }
        for (name, d) in &self.backends {
            d.validate(name)?;
        }
        let mut names = BTreeSet::new();
        for run in &self.runs {
            let safe = !run.name.is_empty()
                && run.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !safe {
                return Err(invalid(format!(
                    "run name {:?} must be non-empty ASCII letters, digits, '-' or '_'",
                    run.name
                )));
            }
            if !names.insert(&run.name) {
                return Err(invalid(format!("duplicate run name {}", run.name)));
            }
            for (role, backend) in [("child", run.child()), ("caregiver", run.caregiver())] {
                match backend {
                    None => return Err(invalid(format!("run {}: no {role} backend", run.name))),
                    Some(b) if !self.backends.contains_key(b) => {
                        return Err(invalid(format!("run {}: unknown backend {b}", run.name)))
                    }
                    _ => {}
                }
            }
            if run.max_turns == 0 {
                return Err(invalid(format!("run {}: max_turns must be positive", run.name)));
            }
            if run.shots == Shots::Few && run.exemplars == 0 {
                return Err(invalid(format!("run {}: few-shot needs exemplars >= 1", run.name)));
            }
        }
        Ok(())
    }

    /// The backend descriptor with the run seed filled in where unset.
    pub fn backend_descriptor(&self, name: &str) -> BackendDescriptor {
        let mut d = self.backends[name].clone();
        if d.kind == BackendKind::Shuffled && d.seed.is_none() {
            d.seed = Some(self.seed);
        }
        d
    }

    pub fn run(&self, name: &str) -> Option<&RunSpec> {
        self.runs.iter().find(|r| r.name == name)
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let source_text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = RunConfig::from_toml(&source_text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.resolve_paths(&base);
    config.validate()?;
    Ok(LoadedConfig {
        config,
        source_text,
        path: path.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output_dir = "out"
[corpus]
paths = ["."]
"#;

    #[test]
    fn defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.corpus.ages, vec![2, 3, 4, 5]);
        assert_eq!(c.corpus.per_age, 10);
        assert_eq!(c.analysis.n_boot, 1000);
        assert_eq!(c.providers.embedder.kind, EmbedderKind::HashedBow);
        assert!(c.runs.is_empty());
    }

    #[test]
    fn unknown_keys_rejected() {
        for extra in ["colour = 1\n", "[corpus.extra]\nx = 1\n"] {
            let text = format!("{extra}{MINIMAL}");
            assert_eq!(RunConfig::from_toml(&text).unwrap_err().code, ErrorCode::ConfigInvalid, "{extra}");
        }
        let bad_backend = format!("{MINIMAL}[backends.p]\nkind = \"parrot\"\ntemprature = 0.5\n");
        assert!(RunConfig::from_toml(&bad_backend).is_err());
    }

    #[test]
    fn run_validation() {
        let text = format!(
            "{MINIMAL}[backends.p]\nkind = \"parrot\"\n[[runs]]\nname = \"a\"\nprotocol = \"multi\"\nbackend = \"q\"\n"
        );
        let mut c = RunConfig::from_toml(&text).unwrap();
        c.resolve_paths(Path::new(env!("CARGO_MANIFEST_DIR")));
        let err = c.validate().unwrap_err();
        assert!(err.message.contains("unknown backend q"));
        c.runs[0].backend = Some("p".into());
        c.validate().unwrap();
        c.runs[0].name = "a/b".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_corpus_path() {
        let mut c = RunConfig::from_toml(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/definitely/not/here"));
        assert_eq!(c.validate().unwrap_err().code, ErrorCode::CorpusNotFound);
    }
}
