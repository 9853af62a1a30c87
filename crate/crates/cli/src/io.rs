//! JSON-lines files and the vocabulary table stored beside them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use longseq_core::objectives::Vocab;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// One input document line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDocument {
    pub id: String,
    pub text: String,
    #[serde(default = "default_source")]
    pub source: String,
}

fn default_source() -> String {
    "unknown".into()
}

/// Parses every non-blank line; errors name the 1-based line number.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{origin}: malformed JSON on line {}", i + 1)))
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_jsonl(&text, &path.display().to_string())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    write_text(path, &out)
}

/// `data/seqs.jsonl` → `data/seqs.vocab.json`.
pub fn vocab_path(data: &Path) -> PathBuf {
    data.with_extension("vocab.json")
}

/// Path with a different suffix: `data/seqs.jsonl` → `data/seqs.<suffix>`.
pub fn sidecar_path(data: &Path, suffix: &str) -> PathBuf {
    data.with_extension(suffix)
}

pub fn write_vocab(data: &Path, vocab: &Vocab) -> Result<()> {
    write_text(&vocab_path(data), &serde_json::to_string(vocab)?)
}

/// The vocabulary stored beside `data`, or the empty default when there is
/// none.
pub fn read_vocab(data: &Path) -> Result<Vocab> {
    let path = vocab_path(data);
    if !path.exists() {
        log::warn!("no vocabulary at {}; using an empty one", path.display());
        return Ok(Vocab::default());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed vocabulary {}", path.display()))
}
