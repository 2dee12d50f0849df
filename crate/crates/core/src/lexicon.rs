//! Word-level resources: concreteness norms and the function-word list.
//!
//! The concreteness file is a delimited table (comma or tab) whose header names
//! a word column (`Word`, `word`, `lemma`, ...) and a mean-rating column
//! (`Conc.M`, `mean`, `rating`, ...). Other columns are ignored. Ratings outside
//! the 1-5 scale, blank words and duplicate words are skipped and counted.
//!
//! The function-word file holds one word per line; blank lines and `#` comments
//! are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

pub const MIN_RATING: f64 = 1.0;
pub const MAX_RATING: f64 = 5.0;

const WORD_COLUMNS: &[&str] = &["word", "words", "lemma", "token", "item"];
const RATING_COLUMNS: &[&str] = &[
    "conc.m",
    "conc_m",
    "mean",
    "mean_rating",
    "rating",
    "concreteness",
];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: no valid entries")]
    NoValidEntries { source_name: String },
    #[error("{source_name}: header has no {column} column")]
    MissingColumn {
        source_name: String,
        column: &'static str,
    },
    #[error("{source_name}: {message}")]
    Malformed { source_name: String, message: String },
}

pub type Result<T, E = LexiconError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct ConcretenessLexicon {
    entries: BTreeMap<String, f64>,
    pub source_name: String,
    /// Rows skipped while loading (bad rating, blank word, duplicate, short row).
    pub skipped_rows: usize,
}

impl ConcretenessLexicon {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| LexiconError::FileUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&path.display().to_string(), &text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(source_name: &str, text: &str) -> Result<Self> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let header_line = text.lines().next().unwrap_or("");
        let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let headers = reader
            .headers()
            .map_err(|e| LexiconError::Malformed {
                source_name: source_name.to_string(),
                message: e.to_string(),
            })?
            .clone();
        let find = |names: &[&str]| {
            headers
                .iter()
                .position(|h| names.contains(&h.to_ascii_lowercase().as_str()))
        };
        let word_col = find(WORD_COLUMNS).ok_or_else(|| LexiconError::MissingColumn {
            source_name: source_name.to_string(),
            column: "word",
        })?;
        let rating_col = find(RATING_COLUMNS).ok_or_else(|| LexiconError::MissingColumn {
            source_name: source_name.to_string(),
            column: "mean rating",
        })?;

        let mut entries = BTreeMap::new();
        let mut skipped = 0;
        for record in reader.records() {
            let Ok(record) = record else {
                skipped += 1;
                continue;
            };
            let word = record.get(word_col).unwrap_or("").to_lowercase();
            let rating = record
                .get(rating_col)
                .and_then(|r| r.replace(',', ".").parse::<f64>().ok())
                .filter(|r| (MIN_RATING..=MAX_RATING).contains(r));
            match rating {
                Some(r) if !word.is_empty() && !entries.contains_key(&word) => {
                    entries.insert(word, r);
                }
                _ => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("{source_name}: skipped {skipped} malformed concreteness row(s)");
        }
        if entries.is_empty() {
            return Err(LexiconError::NoValidEntries {
                source_name: source_name.to_string(),
            });
        }
        Ok(Self {
            entries,
            source_name: source_name.to_string(),
            skipped_rows: skipped,
        })
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Case-insensitive lookup.
    pub fn rating(&self, word: &str) -> Option<f64> {
        match self.entries.get(word) {
            Some(r) => Some(*r),
            None => self.entries.get(&word.to_lowercase()).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionWordSet {
    words: BTreeSet<String>,
    pub source_name: String,
}

impl FunctionWordSet {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| LexiconError::FileUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str(&path.display().to_string(), &text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(source_name: &str, text: &str) -> Result<Self> {
        let words: BTreeSet<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        if words.is_empty() {
            return Err(LexiconError::NoValidEntries {
                source_name: source_name.to_string(),
            });
        }
        Ok(Self {
            words,
            source_name: source_name.to_string(),
        })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// A token is a content word iff it is not on the function-word list.
pub fn is_content_word(word: &str, fws: &FunctionWordSet) -> bool {
    !fws.contains(word)
}

pub fn load_lexicons(
    concreteness_path: &Path,
    function_words_path: &Path,
) -> Result<(ConcretenessLexicon, FunctionWordSet)> {
    Ok((
        ConcretenessLexicon::from_path(concreteness_path)?,
        FunctionWordSet::from_path(function_words_path)?,
    ))
}

/// The function-word list shipped with the toolkit.
pub fn bundled_function_words() -> FunctionWordSet {
    FunctionWordSet::from_str("bundled:function_words.txt", include_str!("../data/function_words.txt"))
        .expect("bundled list parses")
}

/// The small illustrative ratings table shipped with the toolkit. Not a
/// published norm set.
pub fn bundled_concreteness_sample() -> ConcretenessLexicon {
    ConcretenessLexicon::from_str(
        "bundled:concreteness_sample.csv",
        include_str!("../data/concreteness_sample.csv"),
    )
    .expect("bundled table parses")
}
