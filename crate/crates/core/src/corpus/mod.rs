//! Fixed-length pretraining sequences from a document store, built either by
//! shuffled concatenation or by packing nearest neighbours inside k-means
//! clusters of hashed bag-of-token embeddings.

mod embed;
mod kmeans;
mod linked;
mod random;
mod stats;

pub use embed::{cosine, embed_document, embedding_input, hash_token, Embedding};
pub use kmeans::{kmeans, KMeansResult};
pub use linked::{assemble_linked, ranked_neighbors, LinkedConfig};
pub use random::assemble_random;
pub use stats::{length_stats, HistogramBin, LengthStats, TagStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objectives::{TokenId, Vocab, DOC_SEPARATOR};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<TokenId>,
    pub source_tag: String,
    /// Sentence start offsets, beginning at 0.
    pub sentence_starts: Vec<usize>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<TokenId>, source_tag: impl Into<String>) -> Self {
        let sentence_starts = if tokens.is_empty() { vec![] } else { vec![0] };
        Document {
            id: id.into(),
            tokens,
            source_tag: source_tag.into(),
            sentence_starts,
        }
    }

    pub fn with_sentences(mut self, starts: Vec<usize>) -> Self {
        self.sentence_starts = starts;
        self
    }

    /// Whitespace-tokenizes `text`; a new sentence starts after every word
    /// ending in `.`, `!` or `?`.
    pub fn from_text(id: impl Into<String>, text: &str, source_tag: impl Into<String>, vocab: &mut Vocab) -> Self {
        let words: Vec<&str> = text.split_whitespace().collect();
        let tokens = words.iter().map(|w| vocab.intern(w)).collect();
        let mut starts = vec![];
        let mut at_start = true;
        for (i, w) in words.iter().enumerate() {
            if at_start {
                starts.push(i);
            }
            at_start = w.ends_with(['.', '!', '?']);
        }
        Document::new(id, tokens, source_tag).with_sentences(starts)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self, vocab: &Vocab) -> Result<(), CorpusError> {
        if self.tokens.is_empty() {
            return Err(CorpusError::EmptyDocument { id: self.id.clone() });
        }
        if let Some(position) = self.tokens.iter().position(|&t| vocab.is_reserved(t)) {
            return Err(CorpusError::ReservedToken {
                id: self.id.clone(),
                position,
                token: self.tokens[position],
            });
        }
        Ok(())
    }
}

/// Tokens `[start, end)` of document `doc_id`; serialized as a triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, usize, usize)", into = "(String, usize, usize)")]
pub struct Provenance {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

impl From<(String, usize, usize)> for Provenance {
    fn from((doc_id, start, end): (String, usize, usize)) -> Self {
        Provenance { doc_id, start, end }
    }
}

impl From<Provenance> for (String, usize, usize) {
    fn from(p: Provenance) -> Self {
        (p.doc_id, p.start, p.end)
    }
}

/// One output line: `{"tokens": [...], "provenance": [[doc_id, start, end], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub tokens: Vec<TokenId>,
    pub provenance: Vec<Provenance>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    /// Tokens (separators included) left in the final partial chunk.
    pub dropped_tokens: usize,
    /// Linked sequences abandoned because their cluster ran dry.
    pub discarded_sequences: usize,
    /// Highest cosine similarity between two documents of each emitted
    /// linked sequence (0 for single-document sequences).
    pub max_pair_similarity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceBatch {
    pub seq_len: usize,
    pub sequences: Vec<Sequence>,
    pub diagnostics: BatchDiagnostics,
}

impl SequenceBatch {
    pub fn to_json_lines(&self) -> String {
        self.sequences
            .iter()
            .map(|s| serde_json::to_string(s).expect("sequence serializes") + "\n")
            .collect()
    }

    /// How many sequences each document contributed tokens to.
    pub fn usage_counts(&self) -> std::collections::BTreeMap<&str, usize> {
        let mut usage = std::collections::BTreeMap::new();
        for s in &self.sequences {
            let mut ids: Vec<&str> = s.provenance.iter().map(|p| p.doc_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            for id in ids {
                *usage.entry(id).or_insert(0) += 1;
            }
        }
        usage
    }
}

/// Checks that every sequence has length `seq_len` and that, split on the
/// separator, its non-empty pieces are exactly the provenance spans in
/// order.
pub fn verify_tiling(batch: &SequenceBatch, store: &[Document]) -> Result<(), String> {
    let by_id: std::collections::HashMap<&str, &Document> = store.iter().map(|d| (d.id.as_str(), d)).collect();
    for (i, s) in batch.sequences.iter().enumerate() {
        if s.tokens.len() != batch.seq_len {
            return Err(format!(
                "sequence {i} has {} tokens, expected {}",
                s.tokens.len(),
                batch.seq_len
            ));
        }
        let pieces: Vec<&[TokenId]> = s
            .tokens
            .split(|&t| t == DOC_SEPARATOR)
            .filter(|p| !p.is_empty())
            .collect();
        if pieces.len() != s.provenance.len() {
            return Err(format!(
                "sequence {i}: {} pieces but {} provenance entries",
                pieces.len(),
                s.provenance.len()
            ));
        }
        for (piece, p) in pieces.iter().zip(&s.provenance) {
            let doc = by_id
                .get(p.doc_id.as_str())
                .ok_or(format!("unknown document {}", p.doc_id))?;
            if doc.tokens.get(p.start..p.end) != Some(*piece) {
                return Err(format!(
                    "sequence {i}: piece does not match {}[{}..{}]",
                    p.doc_id, p.start, p.end
                ));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("store holds {available} tokens but a sequence needs {needed} ({} short)", needed - available)]
    InsufficientTokens { available: usize, needed: usize },
    #[error("sequence length must be positive")]
    ZeroLength,
    #[error("embedding dimension must be >= 8, got {0}")]
    InvalidDim(usize),
    #[error("cannot form {k} clusters from {n} points")]
    InvalidClusters { k: usize, n: usize },
    #[error("document {id} has no tokens")]
    EmptyDocument { id: String },
    #[error("document {id} holds reserved id {token} at position {position}")]
    ReservedToken {
        id: String,
        position: usize,
        token: TokenId,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences_split_after_terminal_punctuation() {
        let mut v = Vocab::new(4);
        let d = Document::from_text("d", "One two. Three! four five? six", "t", &mut v);
        assert_eq!(d.sentence_starts, vec![0, 2, 3, 5]);
        assert_eq!(d.len(), 6);
        assert!(d.validate(&v).is_ok());
        let bad = Document::new("x", vec![DOC_SEPARATOR], "t");
        assert!(matches!(
            bad.validate(&v),
            Err(CorpusError::ReservedToken { position: 0, .. })
        ));
        assert!(Document::new("e", vec![], "t").validate(&v).is_err());
    }

    #[test]
    fn sequence_json_shape() {
        let s = Sequence {
            tokens: vec![9, 1, 10],
            provenance: vec![("a".into(), 0, 1).into(), ("b".into(), 3, 4).into()],
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"tokens":[9,1,10],"provenance":[["a",0,1],["b",3,4]]}"#
        );
    }
}
