//! Hashed bag-of-token embeddings.

use serde::{Deserialize, Serialize};

use super::{CorpusError, Document};
use crate::objectives::{pegasus_select, TokenId};

/// Documents longer than this embed only their primary sentences.
pub const LONG_DOCUMENT: usize = 512;
const PRIMARY_RATIO: f64 = 0.2;
const PSEUDO_SENTENCE: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub doc_id: String,
    pub vector: Vec<f64>,
}

/// Coordinate and sign for a token (multiplicative hashing).
pub fn hash_token(t: TokenId, dim: usize) -> (usize, f64) {
    let h = (u64::from(t) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let coord = ((h >> 33) % dim as u64) as usize;
    let sign = if h >> 32 & 1 == 1 { -1.0 } else { 1.0 };
    (coord, sign)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Tokens that feed the embedding: the whole document, or for long ones the
/// sentences picked by the primary-sentence ranking (top fifth of the
/// length). Documents without usable sentence offsets are cut into 32-token
/// pseudo-sentences.
pub fn embedding_input(doc: &Document) -> Vec<TokenId> {
    if doc.len() <= LONG_DOCUMENT {
        return doc.tokens.clone();
    }
    let pseudo: Vec<usize> = (0..doc.len()).step_by(PSEUDO_SENTENCE).collect();
    let picked = pegasus_select(&doc.tokens, &doc.sentence_starts, PRIMARY_RATIO)
        .map(|p| (p, doc.sentence_starts.as_slice()))
        .or_else(|_| pegasus_select(&doc.tokens, &pseudo, PRIMARY_RATIO).map(|p| (p, pseudo.as_slice())));
    match picked {
        Ok((sentences, starts)) => sentences
            .iter()
            .flat_map(|&i| {
                let end = starts.get(i + 1).copied().unwrap_or(doc.len());
                doc.tokens[starts[i]..end].iter().copied()
            })
            .collect(),
        Err(_) => doc.tokens.clone(),
    }
}

fn embed_tokens(tokens: &[TokenId], dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for &t in tokens {
        let (c, s) = hash_token(t, dim);
        v[c] += s;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Unit-norm hashed embedding; a vector whose hashed counts cancel to zero
/// becomes the first basis vector.
pub fn embed_document(doc: &Document, dim: usize) -> Result<Embedding, CorpusError> {
    if dim < 8 {
        return Err(CorpusError::InvalidDim(dim));
    }
    Ok(Embedding {
        doc_id: doc.id.clone(),
        vector: embed_tokens(&embedding_input(doc), dim),
    })
}
