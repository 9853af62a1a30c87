//! Whitespace vocabulary with a fixed reserved-id prefix.
//!
//! Ids `0..4` are pad, document separator, sentence mask and query prefix,
//! followed by `num_sentinels` sentinel ids; corpus tokens come after, in
//! first-appearance order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const DOC_SEPARATOR: TokenId = 1;
pub const MASK_SENTENCE: TokenId = 2;
pub const QUERY_PREFIX: TokenId = 3;
pub const FIRST_SENTINEL: TokenId = 4;
pub const DEFAULT_SENTINELS: u32 = 4096;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocab {
    num_sentinels: u32,
    words: Vec<String>,
    index: HashMap<String, TokenId>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    num_sentinels: u32,
    words: Vec<String>,
}

impl From<VocabFile> for Vocab {
    fn from(f: VocabFile) -> Self {
        let mut v = Vocab::new(f.num_sentinels);
        for w in f.words {
            v.intern(&w);
        }
        v
    }
}

impl From<Vocab> for VocabFile {
    fn from(v: Vocab) -> Self {
        VocabFile {
            num_sentinels: v.num_sentinels,
            words: v.words,
        }
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::new(DEFAULT_SENTINELS)
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.num_sentinels == other.num_sentinels && self.words == other.words
    }
}

impl Vocab {
    pub fn new(num_sentinels: u32) -> Self {
        Vocab {
            num_sentinels,
            words: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn num_sentinels(&self) -> u32 {
        self.num_sentinels
    }

    pub fn first_corpus_id(&self) -> TokenId {
        FIRST_SENTINEL + self.num_sentinels
    }

    pub fn sentinel(&self, i: usize) -> Option<TokenId> {
        (i < self.num_sentinels as usize).then(|| FIRST_SENTINEL + i as TokenId)
    }

    /// Position of a sentinel id in the sentinel range.
    pub fn sentinel_index(&self, id: TokenId) -> Option<usize> {
        self.is_sentinel(id).then(|| (id - FIRST_SENTINEL) as usize)
    }

    pub fn is_sentinel(&self, id: TokenId) -> bool {
        (FIRST_SENTINEL..self.first_corpus_id()).contains(&id)
    }

    pub fn is_reserved(&self, id: TokenId) -> bool {
        id < self.first_corpus_id()
    }

    /// Id of `word`, adding it if new.
    pub fn intern(&mut self, word: &str) -> TokenId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.first_corpus_id() + self.words.len() as TokenId;
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn id_of(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied()
    }

    pub fn word_of(&self, id: TokenId) -> Option<&str> {
        let i = id.checked_sub(self.first_corpus_id())? as usize;
        self.words.get(i).map(String::as_str)
    }

    /// Splits on Unicode whitespace and interns every piece.
    pub fn encode(&mut self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().map(|w| self.intern(w)).collect()
    }

    /// Human-readable rendering, with reserved ids shown in angle brackets.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| match id {
                PAD => "<pad>".to_string(),
                DOC_SEPARATOR => "<sep>".to_string(),
                MASK_SENTENCE => "<mask_sent>".to_string(),
                QUERY_PREFIX => "<query>".to_string(),
                _ => match self.sentinel_index(id) {
                    Some(i) => format!("<extra_id_{i}>"),
                    None => self.word_of(id).map_or_else(|| format!("<unk:{id}>"), str::to_string),
                },
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Number of corpus words.
    pub fn corpus_len(&self) -> usize {
        self.words.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_precede_corpus_ids() {
        let mut v = Vocab::new(8);
        let ids = v.encode("the cat  sat on\tthe mat");
        assert_eq!(ids, vec![12, 13, 14, 15, 12, 16]);
        assert!(ids.iter().all(|&i| !v.is_reserved(i)));
        assert_eq!(v.sentinel(0), Some(4));
        assert_eq!(v.sentinel(8), None);
        assert!(v.is_sentinel(11) && !v.is_sentinel(12));
        assert_eq!(v.decode(&[3, 5, 12, 0]), "<query> <extra_id_1> the <pad>");
    }

    #[test]
    fn json_round_trip_rebuilds_index() {
        let mut v = Vocab::new(2);
        v.encode("b a c a");
        let back: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id_of("c"), v.id_of("c"));
    }
}
