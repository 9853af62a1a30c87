//! Similarity-linked packing: each seed document is followed by its nearest
//! neighbours from the same cluster until the sequence is full. A document
//! may appear in at most two sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{embed_document, kmeans, BatchDiagnostics, CorpusError, Document, Provenance, Sequence, SequenceBatch};
use crate::objectives::DOC_SEPARATOR;

pub const MAX_USES: u8 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkedConfig {
    pub seq_len: usize,
    pub clusters: usize,
    pub top_k: usize,
    pub dim: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for LinkedConfig {
    fn default() -> Self {
        LinkedConfig {
            seq_len: 2048,
            clusters: 16,
            top_k: 32,
            dim: 256,
            max_iters: 50,
            seed: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Other members of the cluster by descending cosine similarity to
/// `seed` (the vectors are unit norm, so a dot product), ties to the lower
/// index, at most `top_k` of them.
pub fn ranked_neighbors(seed: usize, members: &[usize], vectors: &[Vec<f64>], top_k: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = members
        .iter()
        .filter(|&&m| m != seed)
        .map(|&m| (m, dot(&vectors[seed], &vectors[m])))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    ranked
}

#[derive(Default)]
struct ClusterOutput {
    sequences: Vec<Sequence>,
    similarity: Vec<f64>,
    discarded: usize,
}

fn pack_cluster(members: &[usize], store: &[Document], vectors: &[Vec<f64>], cfg: &LinkedConfig) -> ClusterOutput {
    let s_len = cfg.seq_len;
    let mut usage: std::collections::HashMap<usize, u8> = members.iter().map(|&m| (m, 0)).collect();
    let mut out = ClusterOutput::default();
    for &seed in members {
        if usage[&seed] >= MAX_USES {
            continue;
        }
        let mut chosen = vec![seed];
        let mut len = store[seed].len();
        if len < s_len {
            for (nb, _) in ranked_neighbors(seed, members, vectors, cfg.top_k) {
                if usage[&nb] >= MAX_USES {
                    continue;
                }
                chosen.push(nb);
                len += 1 + store[nb].len();
                if len >= s_len {
                    break;
                }
            }
        }
        if len < s_len {
            out.discarded += 1;
            continue;
        }
        let mut tokens = Vec::with_capacity(s_len);
        let mut provenance = Vec::new();
        let mut included = Vec::new();
        for (k, &d) in chosen.iter().enumerate() {
            if k > 0 {
                tokens.push(DOC_SEPARATOR);
            }
            let take = store[d].len().min(s_len - tokens.len());
            if take == 0 {
                break;
            }
            tokens.extend_from_slice(&store[d].tokens[..take]);
            provenance.push(Provenance {
                doc_id: store[d].id.clone(),
                start: 0,
                end: take,
            });
            included.push(d);
        }
        let mut best: f64 = 0.0;
        for (i, &a) in included.iter().enumerate() {
            for &b in &included[i + 1..] {
                best = best.max(dot(&vectors[a], &vectors[b]));
            }
        }
        for d in &included {
            *usage.get_mut(d).expect("member") += 1;
        }
        out.similarity.push(best);
        out.sequences.push(Sequence { tokens, provenance });
    }
    out
}

/// Embeds every document, clusters with k-means and packs each cluster.
/// Clusters are processed in index order, seeds within a cluster in store
/// order; sequences that cannot reach `seq_len` are dropped and counted.
pub fn assemble_linked(store: &[Document], cfg: &LinkedConfig) -> Result<SequenceBatch, CorpusError> {
    if cfg.seq_len == 0 {
        return Err(CorpusError::ZeroLength);
    }
    let available: usize = store.iter().map(Document::len).sum();
    if available < cfg.seq_len {
        return Err(CorpusError::InsufficientTokens {
            available,
            needed: cfg.seq_len,
        });
    }
    let vectors: Vec<Vec<f64>> = store
        .par_iter()
        .map(|d| embed_document(d, cfg.dim).map(|e| e.vector))
        .collect::<Result<_, _>>()?;
    let k = cfg.clusters.clamp(1, store.len());
    let clusters = kmeans(&vectors, k, cfg.seed, cfg.max_iters)?.members();
    let outputs: Vec<ClusterOutput> = clusters
        .par_iter()
        .map(|m| pack_cluster(m, store, &vectors, cfg))
        .collect();
    let mut batch = SequenceBatch {
        seq_len: cfg.seq_len,
        sequences: vec![],
        diagnostics: BatchDiagnostics::default(),
    };
    for o in outputs {
        batch.sequences.extend(o.sequences);
        batch.diagnostics.max_pair_similarity.extend(o.similarity);
        batch.diagnostics.discarded_sequences += o.discarded;
    }
    Ok(batch)
}
