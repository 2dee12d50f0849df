//! Corpus files: CHAT `.cha`, line-delimited utterance records, and the
//! serialized benchmark set.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_chat, BenchmarkSet, Conversation, CorpusError, Result, Role, Utterance};

pub const CONVERSATIONS_FILE: &str = "conversations.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const STATS_FILE: &str = "stats.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// Decide per file from the extension (`.cha` → CHAT, otherwise records).
    #[default]
    Auto,
    Chat,
    Records,
}

/// One utterance in the line-delimited record format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub conversation_id: String,
    /// `child`/`CHI` or `caregiver`/`ADULT`; any CHAT speaker code also works.
    pub role: String,
    pub age_months: Option<u32>,
    pub text: String,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Groups records into conversations, in order of first appearance.
pub fn read_records(text: &str) -> Result<Vec<Conversation>> {
    let mut conversations: Vec<Conversation> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: UtteranceRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::InvalidRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        let role = Role::parse(&rec.role).unwrap_or_else(|| Role::from_speaker_code(rec.role.trim()));
        let utterance = Utterance::new(role, &rec.text);
        match conversations.iter_mut().find(|c| c.id == rec.conversation_id) {
            Some(conv) => {
                if conv.age_months != rec.age_months {
                    return Err(CorpusError::InvalidRecord {
                        line: i + 1,
                        reason: format!("age changes within conversation {}", rec.conversation_id),
                    });
                }
                conv.utterances.push(utterance);
            }
            None => conversations.push(Conversation::new(
                rec.conversation_id,
                rec.age_months,
                vec![utterance],
            )),
        }
    }
    for conv in &mut conversations {
        conv.reindex();
    }
    Ok(conversations)
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| io_err(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for entry in entries {
            if entry.is_dir() {
                collect_files(&entry, out)?;
            } else if matches!(
                entry.extension().and_then(|e| e.to_str()),
                Some("cha" | "jsonl")
            ) {
                out.push(entry);
            }
        }
        Ok(())
    } else if path.is_file() {
        out.push(path.to_path_buf());
        Ok(())
    } else {
        Err(CorpusError::NotFound(path.display().to_string()))
    }
}

/// Loads every transcript under `paths` (files or directories, recursively,
/// sorted). CHAT conversations take their id from the file stem.
pub fn load_corpus_paths(paths: &[PathBuf], format: CorpusFormat) -> Result<Vec<Conversation>> {
    let mut files = Vec::new();
    for p in paths {
        collect_files(p, &mut files)?;
    }
    let mut conversations = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
        let is_chat = match format {
            CorpusFormat::Chat => true,
            CorpusFormat::Records => false,
            CorpusFormat::Auto => file.extension().and_then(|e| e.to_str()) == Some("cha"),
        };
        if is_chat {
            let id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("conversation")
                .to_string();
            conversations.push(parse_chat(&id, &text)?);
        } else {
            conversations.extend(read_records(&text)?);
        }
    }
    Ok(conversations)
}

pub fn write_conversations_jsonl(path: &Path, conversations: &[Conversation]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for conv in conversations {
        serde_json::to_writer(&mut w, conv)?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_conversations_jsonl(path: &Path) -> Result<Vec<Conversation>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::InvalidRecord {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Writes `conversations.jsonl`, `pairs.jsonl` and `stats.csv` into `dir`.
pub fn write_benchmark_set(set: &BenchmarkSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_conversations_jsonl(&dir.join(CONVERSATIONS_FILE), &set.conversations)?;

    let pairs_path = dir.join(PAIRS_FILE);
    let file = fs::File::create(&pairs_path).map_err(|e| io_err(&pairs_path, e))?;
    let mut w = BufWriter::new(file);
    for pair in &set.pairs {
        serde_json::to_writer(&mut w, pair)?;
        w.write_all(b"\n").map_err(|e| io_err(&pairs_path, e))?;
    }
    w.flush().map_err(|e| io_err(&pairs_path, e))?;

    let stats_path = dir.join(STATS_FILE);
    let mut csv = csv::Writer::from_path(&stats_path)?;
    csv.serialize(&set.stats)?;
    csv.flush().map_err(|e| io_err(&stats_path, e))?;
    Ok(())
}

/// Reads a set written by [`write_benchmark_set`]. Pairs are re-derived from
/// the stored (already alternated) conversations.
pub fn read_benchmark_set(dir: &Path) -> Result<BenchmarkSet> {
    let path = dir.join(CONVERSATIONS_FILE);
    if !path.exists() {
        return Err(CorpusError::NotFound(path.display().to_string()));
    }
    let conversations = read_conversations_jsonl(&path)?;
    BenchmarkSet::from_conversations(&conversations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_group_by_conversation() {
        let text = r#"{"conversation_id":"a","role":"child","age_months":30,"text":"hi ."}
{"conversation_id":"b","role":"MOT","age_months":40,"text":"hello there"}
{"conversation_id":"a","role":"ADULT","age_months":30,"text":"&=laughs hi sweetie"}

{"conversation_id":"a","role":"CHI","age_months":30,"text":"xxx"}"#;
        let convs = read_records(text).unwrap();
        assert_eq!(convs.len(), 2);
        assert_eq!(convs[0].id, "a");
        assert_eq!(convs[0].len(), 3);
        assert_eq!(convs[0].utterances[1].role, Role::Caregiver);
        assert_eq!(convs[0].utterances[1].tokens, vec!["hi", "sweetie"]);
        assert!(convs[0].utterances[2].is_unintelligible);
        assert_eq!(convs[0].utterances[2].index, 2);
        assert_eq!(convs[1].utterances[0].role, Role::Caregiver);
    }

    #[test]
    fn record_errors() {
        assert!(matches!(
            read_records("{not json}"),
            Err(CorpusError::InvalidRecord { line: 1, .. })
        ));
        let text = r#"{"conversation_id":"a","role":"child","age_months":30,"text":"x"}
{"conversation_id":"a","role":"child","age_months":31,"text":"y"}"#;
        assert!(read_records(text).is_err());
    }

    #[test]
    fn missing_path() {
        let err = load_corpus_paths(&[PathBuf::from("/definitely/not/here")], CorpusFormat::Auto)
            .unwrap_err();
        assert!(matches!(err, CorpusError::NotFound(_)));
    }

    #[test]
    fn benchmark_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let conv = parse_chat(
            "x",
            "@ID:\teng|c|CHI|2;06.|||||\n*MOT:\thi .\n*MOT:\tlook .\n*CHI:\tball .",
        )
        .unwrap();
        let set = BenchmarkSet::from_conversations(&[conv]).unwrap();
        write_benchmark_set(&set, dir.path()).unwrap();
        let back = read_benchmark_set(dir.path()).unwrap();
        assert_eq!(back, set);
        let stats = fs::read_to_string(dir.path().join(STATS_FILE)).unwrap();
        assert!(stats.starts_with("conversation_count,pair_count,"));
        assert!(stats.contains("\n1,3,3,1,2,3\n"));
    }
}
