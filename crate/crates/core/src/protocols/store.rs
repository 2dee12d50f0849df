//! Run directory layout: `manifest.json`, per-conversation checkpoints under
//! `parts/` (each with a `.done` marker), and the final `generated.jsonl`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{GeneratedConversation, GeneratedCorpus, ProtocolError, Result, RunManifest};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GENERATED_FILE: &str = "generated.jsonl";
const PARTS_DIR: &str = "parts";

fn io_err(path: &Path, source: std::io::Error) -> ProtocolError {
    ProtocolError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    /// Opens `dir` for `manifest`. A fresh directory gets the manifest; an
    /// existing one must hold a manifest with the same digest, whose
    /// checkpoints are then reused.
    pub fn open(dir: &Path, manifest: &RunManifest) -> Result<Self> {
        let parts = dir.join(PARTS_DIR);
        fs::create_dir_all(&parts).map_err(|e| io_err(&parts, e))?;
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            let existing = read_manifest(&path)?;
            if existing.digest() != manifest.digest() {
                return Err(ProtocolError::ManifestMismatch {
                    dir: dir.display().to_string(),
                });
            }
        } else {
            let text = serde_json::to_string_pretty(manifest)?;
            fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        }
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> Result<RunManifest> {
        read_manifest(&self.dir.join(MANIFEST_FILE))
    }

    fn part_path(&self, key: &str) -> PathBuf {
        let safe: String = key
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        self.dir.join(PARTS_DIR).join(format!("{safe}.json"))
    }

    /// A checkpoint, if its completion marker exists.
    pub fn load_part(&self, key: &str) -> Result<Option<GeneratedConversation>> {
        let path = self.part_path(key);
        if !path.with_extension("done").exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Writes a checkpoint, then its marker, so a crash never leaves a marker
    /// without a complete part.
    pub fn save_part(&self, key: &str, conv: &GeneratedConversation) -> Result<()> {
        let path = self.part_path(key);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(conv)?).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        let marker = path.with_extension("done");
        fs::write(&marker, b"").map_err(|e| io_err(&marker, e))
    }

    pub fn completed_parts(&self) -> usize {
        fs::read_dir(self.dir.join(PARTS_DIR))
            .map(|rd| {
                rd.filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "done"))
                    .count()
            })
            .unwrap_or(0)
    }
}

fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `generated.jsonl` (one conversation per line) and `manifest.json`
/// into `dir`.
pub fn write_generated(dir: &Path, corpus: &GeneratedCorpus) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(GENERATED_FILE);
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    for conv in &corpus.conversations {
        serde_json::to_writer(&mut w, conv)?;
        w.write_all(b"\n").map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    let mpath = dir.join(MANIFEST_FILE);
    if !mpath.exists() {
        fs::write(&mpath, serde_json::to_string_pretty(&corpus.manifest)? + "\n").map_err(|e| io_err(&mpath, e))?;
    }
    Ok(())
}

pub fn read_generated(dir: &Path) -> Result<GeneratedCorpus> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let path = dir.join(GENERATED_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let conversations = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(GeneratedCorpus { manifest, conversations })
}
