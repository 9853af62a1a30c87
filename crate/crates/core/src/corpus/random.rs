use rand::seq::SliceRandom;

use super::{BatchDiagnostics, CorpusError, Document, Provenance, Sequence, SequenceBatch};
use crate::objectives::{TokenId, DOC_SEPARATOR};
use crate::seed::rng_for;

struct Packer {
    seq_len: usize,
    tokens: Vec<TokenId>,
    provenance: Vec<Provenance>,
    done: Vec<Sequence>,
}

impl Packer {
    fn flush_if_full(&mut self) {
        if self.tokens.len() == self.seq_len {
            self.done.push(Sequence {
                tokens: std::mem::take(&mut self.tokens),
                provenance: std::mem::take(&mut self.provenance),
            });
        }
    }

    fn separator(&mut self) {
        self.tokens.push(DOC_SEPARATOR);
        self.flush_if_full();
    }

    fn document(&mut self, doc: &Document) {
        let mut pos = 0;
        while pos < doc.len() {
            let take = (doc.len() - pos).min(self.seq_len - self.tokens.len());
            self.tokens.extend_from_slice(&doc.tokens[pos..pos + take]);
            self.provenance.push(Provenance {
                doc_id: doc.id.clone(),
                start: pos,
                end: pos + take,
            });
            pos += take;
            self.flush_if_full();
        }
    }
}

/// Shuffles documents by `seed`, joins them with separators and cuts the
/// stream into consecutive `seq_len` chunks. The final partial chunk is
/// dropped; documents may straddle chunks.
pub fn assemble_random(store: &[Document], seq_len: usize, seed: u64) -> Result<SequenceBatch, CorpusError> {
    if seq_len == 0 {
        return Err(CorpusError::ZeroLength);
    }
    let available: usize = store.iter().map(Document::len).sum();
    if available < seq_len {
        return Err(CorpusError::InsufficientTokens {
            available,
            needed: seq_len,
        });
    }
    let mut order: Vec<usize> = (0..store.len()).collect();
    order.shuffle(&mut rng_for(seed, "assemble-random"));
    let mut packer = Packer {
        seq_len,
        tokens: Vec::with_capacity(seq_len),
        provenance: vec![],
        done: vec![],
    };
    for (k, &i) in order.iter().enumerate() {
        if k > 0 {
            packer.separator();
        }
        packer.document(&store[i]);
    }
    Ok(SequenceBatch {
        seq_len,
        sequences: packer.done,
        diagnostics: BatchDiagnostics {
            dropped_tokens: packer.tokens.len(),
            ..Default::default()
        },
    })
}
