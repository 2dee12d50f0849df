use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnalyzerError, DependencyParser, ParserDescriptor, Result};
use crate::http::JsonEndpoint;
use crate::sync::ConcurrencyLimit;

/// Heads per token; `None` marks the root. Construction validates that the
/// head graph is a single tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyParse {
    tokens: Vec<String>,
    heads: Vec<Option<usize>>,
}

impl DependencyParse {
    /// A head equal to the token's own index is read as the root marker.
    pub fn new(tokens: Vec<String>, heads: Vec<Option<usize>>) -> Result<Self> {
        let n = tokens.len();
        if n == 0 {
            return Err(AnalyzerError::InvalidTree("no tokens".into()));
        }
        if heads.len() != n {
            return Err(AnalyzerError::InvalidTree(format!(
                "{} heads for {n} tokens",
                heads.len()
            )));
        }
        let heads: Vec<Option<usize>> = heads
            .into_iter()
            .enumerate()
            .map(|(i, h)| h.filter(|&h| h != i))
            .collect();
        if let Some(h) = heads.iter().flatten().find(|&&h| h >= n) {
            return Err(AnalyzerError::InvalidTree(format!("head {h} out of range")));
        }
        let roots = heads.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(AnalyzerError::InvalidTree(format!("{roots} roots")));
        }
        // Every node must reach the root within n steps.
        for start in 0..n {
            let mut node = start;
            let mut steps = 0;
            while let Some(h) = heads[node] {
                node = h;
                steps += 1;
                if steps > n {
                    return Err(AnalyzerError::InvalidTree(format!("cycle through token {start}")));
                }
            }
        }
        Ok(Self { tokens, heads })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn heads(&self) -> &[Option<usize>] {
        &self.heads
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Node depth of every token, root = 1.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.heads.len()];
        for start in 0..self.heads.len() {
            // Walk up until a known depth (or the root), then fill back down.
            let mut path = Vec::new();
            let mut node = start;
            while depth[node] == 0 {
                path.push(node);
                match self.heads[node] {
                    Some(h) => node = h,
                    None => break,
                }
            }
            let mut d = if depth[node] == 0 { 0 } else { depth[node] };
            for &p in path.iter().rev() {
                d += 1;
                depth[p] = d;
            }
        }
        depth
    }
}

/// Nodes on the longest root-to-leaf path; a single token has depth 1.
pub fn tree_depth(parse: &DependencyParse) -> usize {
    parse.node_depths().into_iter().max().unwrap_or(0)
}

/// Average node depth over tokens (the per-token reading of "mean depth").
pub fn mean_token_depth(parse: &DependencyParse) -> f64 {
    let depths = parse.node_depths();
    depths.iter().sum::<usize>() as f64 / depths.len() as f64
}

/// Right-branching chain: token 0 is the root, token i depends on token i-1.
/// Non-semantic; keeps offline runs deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainParser;

impl DependencyParser for ChainParser {
    fn id(&self) -> &str {
        "chain"
    }

    fn parse_heads(&self, tokens: &[String]) -> Result<DependencyParse> {
        let heads = (0..tokens.len()).map(|i| i.checked_sub(1)).collect();
        DependencyParse::new(tokens.to_vec(), heads)
    }
}

/// One entry of a golden parse file. Heads use `null` or `-1` for the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenParse {
    pub tokens: Vec<String>,
    pub heads: Vec<Option<i64>>,
}

fn heads_from_wire(heads: &[Option<i64>]) -> Result<Vec<Option<usize>>> {
    heads
        .iter()
        .map(|h| match h {
            None => Ok(None),
            Some(v) if *v < 0 => Ok(None),
            Some(v) => usize::try_from(*v)
                .map(Some)
                .map_err(|_| AnalyzerError::InvalidTree(format!("bad head {v}"))),
        })
        .collect()
}

/// Replays parses frozen from a provider run. Looking up a token sequence
/// that is not in the file fails with [`AnalyzerError::MissingGolden`].
#[derive(Debug, Clone)]
pub struct GoldenParser {
    id: String,
    parses: HashMap<Vec<String>, DependencyParse>,
}

impl GoldenParser {
    pub fn from_entries(id: impl Into<String>, entries: Vec<GoldenParse>) -> Result<Self> {
        let mut parses = HashMap::new();
        for e in entries {
            let parse = DependencyParse::new(e.tokens.clone(), heads_from_wire(&e.heads)?)?;
            parses.insert(e.tokens, parse);
        }
        Ok(Self {
            id: id.into(),
            parses,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let fixture_err = |message: String| AnalyzerError::Fixture {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| fixture_err(e.to_string()))?;
        let entries: Vec<GoldenParse> =
            serde_json::from_str(&text).map_err(|e| fixture_err(e.to_string()))?;
        Self::from_entries(format!("golden:{}", path.display()), entries)
    }

    pub fn len(&self) -> usize {
        self.parses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parses.is_empty()
    }
}

impl DependencyParser for GoldenParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn parse_heads(&self, tokens: &[String]) -> Result<DependencyParse> {
        self.parses
            .get(tokens)
            .cloned()
            .ok_or_else(|| AnalyzerError::MissingGolden(tokens.join(" ")))
    }
}

#[derive(Serialize)]
struct ParseRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct ParseResponse {
    heads: Vec<Option<i64>>,
}

/// Adapter for a parsing service: `POST {tokens: [..]}` → `{heads: [..]}`,
/// root marked by `null` or `-1`. Malformed trees are rejected.
pub struct HttpParser {
    id: String,
    endpoint: JsonEndpoint,
    limit: ConcurrencyLimit,
}

impl HttpParser {
    pub fn new(desc: &ParserDescriptor, url: String, api_key: Option<String>) -> Result<Self> {
        Ok(Self {
            id: desc.name.clone(),
            endpoint: JsonEndpoint::new(url, desc.timeout_secs, api_key, desc.retry.clone())
                .map_err(AnalyzerError::Config)?,
            limit: ConcurrencyLimit::new(desc.max_concurrency),
        })
    }
}

impl DependencyParser for HttpParser {
    fn id(&self) -> &str {
        &self.id
    }

    fn max_concurrency(&self) -> usize {
        self.limit.max()
    }

    fn parse_heads(&self, tokens: &[String]) -> Result<DependencyParse> {
        let _permit = self.limit.acquire();
        let (response, _): (ParseResponse, u32) = self
            .endpoint
            .post(&ParseRequest { tokens })
            .map_err(|f| AnalyzerError::ProviderUnavailable {
                provider: self.id.clone(),
                attempts: f.attempts,
                message: f.message,
            })?;
        DependencyParse::new(tokens.to_vec(), heads_from_wire(&response.heads)?)
    }
}
