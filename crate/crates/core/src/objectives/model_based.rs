//! Model-based denoising: over-mask, score every span with a loss oracle,
//! keep only the hardest spans and restore the rest.

use std::collections::HashMap;

use super::spans::{apply_spans, sample_spans, SpanLengths};
use super::{check_ratio, check_source, CorruptionExample, Objective, ObjectiveError, TokenId, Vocab};

/// Scores how hard a masked span is to recover; higher is harder.
pub trait SpanLossOracle {
    fn span_loss(&self, tokens: &[TokenId]) -> f64;
}

impl<F: Fn(&[TokenId]) -> f64> SpanLossOracle for F {
    fn span_loss(&self, tokens: &[TokenId]) -> f64 {
        self(tokens)
    }
}

/// Add-one smoothed negative log unigram likelihood, averaged over the
/// span: `mean(-ln((count + 1) / (total + |V|)))`.
#[derive(Clone, Debug)]
pub struct UnigramOracle {
    counts: HashMap<TokenId, u64>,
    total: u64,
    vocab_size: u64,
}

impl UnigramOracle {
    /// `vocab_size` defaults to the number of distinct counted tokens.
    pub fn new(counts: HashMap<TokenId, u64>, vocab_size: Option<u64>) -> Result<Self, ObjectiveError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(ObjectiveError::EmptyCounts);
        }
        let vocab_size = vocab_size.unwrap_or(counts.len() as u64);
        Ok(UnigramOracle {
            counts,
            total,
            vocab_size,
        })
    }

    pub fn from_tokens<'a>(
        docs: impl IntoIterator<Item = &'a [TokenId]>,
        vocab_size: Option<u64>,
    ) -> Result<Self, ObjectiveError> {
        let mut counts = HashMap::new();
        for doc in docs {
            for &t in doc {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        UnigramOracle::new(counts, vocab_size)
    }

    pub fn token_loss(&self, t: TokenId) -> f64 {
        let c = self.counts.get(&t).copied().unwrap_or(0);
        -((c + 1) as f64 / (self.total + self.vocab_size) as f64).ln()
    }
}

impl SpanLossOracle for UnigramOracle {
    fn span_loss(&self, tokens: &[TokenId]) -> f64 {
        tokens.iter().map(|&t| self.token_loss(t)).sum::<f64>() / tokens.len() as f64
    }
}

/// `ceil(fraction · n)`, without letting rounding noise in the product
/// push an exact integer up by one.
fn keep_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Same as [`model_based_corrupt`], also returning the first-stage spans as
/// `(start, length)` pairs.
pub fn model_based_corrupt_traced<O: SpanLossOracle + ?Sized>(
    source: &[TokenId],
    oracle: &O,
    initial_mask_ratio: f64,
    keep_fraction: f64,
    sampler: &SpanLengths,
    seed: u64,
    vocab: &Vocab,
) -> Result<(CorruptionExample, Vec<(usize, usize)>), ObjectiveError> {
    check_ratio("initial_mask_ratio", initial_mask_ratio)?;
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(ObjectiveError::InvalidRatio {
            name: "keep_fraction",
            range: "(0, 1]",
            value: keep_fraction,
        });
    }
    check_source(source, vocab)?;
    let stage1 = sample_spans(source.len(), initial_mask_ratio, sampler, seed)?;
    let mut losses = Vec::with_capacity(stage1.len());
    for (index, &(start, length)) in stage1.iter().enumerate() {
        let loss = oracle.span_loss(&source[start..start + length]);
        if !loss.is_finite() {
            return Err(ObjectiveError::NonFiniteLoss {
                index,
                start,
                length,
                loss,
            });
        }
        losses.push(loss);
    }
    let mut order: Vec<usize> = (0..stage1.len()).collect();
    // stage-one spans are sorted by start, so index order is start order
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..keep_count(keep_fraction, stage1.len())].to_vec();
    kept.sort_unstable();
    let spans: Vec<(usize, usize)> = kept.iter().map(|&i| stage1[i]).collect();
    let example = apply_spans(source, &spans, Objective::ModelBased, vocab)?;
    Ok((example, stage1))
}

/// Masks `round(initial_mask_ratio · L)` tokens, then keeps the
/// `ceil(keep_fraction · n)` spans with the highest oracle loss (ties to
/// the earlier span). Other spans are restored in the input; kept spans are
/// renumbered so sentinels ascend.
pub fn model_based_corrupt<O: SpanLossOracle + ?Sized>(
    source: &[TokenId],
    oracle: &O,
    initial_mask_ratio: f64,
    keep_fraction: f64,
    sampler: &SpanLengths,
    seed: u64,
    vocab: &Vocab,
) -> Result<CorruptionExample, ObjectiveError> {
    model_based_corrupt_traced(source, oracle, initial_mask_ratio, keep_fraction, sampler, seed, vocab).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(v: &Vocab, len: usize) -> Vec<TokenId> {
        (0..len)
            .map(|i| v.first_corpus_id() + (i * 7 % 23) as TokenId)
            .collect()
    }

    #[test]
    fn unigram_hand_case() {
        let (a, b) = (100, 101);
        let o = UnigramOracle::new(HashMap::from([(a, 3), (b, 1)]), None).unwrap();
        assert!((o.span_loss(&[b]) - 3f64.ln()).abs() < 1e-15);
        assert!(o.span_loss(&[999]) > o.span_loss(&[a]));
        let uniform = UnigramOracle::new(HashMap::from([(a, 2), (b, 2)]), None).unwrap();
        assert_eq!(uniform.span_loss(&[a, b]), uniform.span_loss(&[b, b]));
        assert_eq!(
            UnigramOracle::new(HashMap::new(), None).unwrap_err(),
            ObjectiveError::EmptyCounts
        );
    }

    #[test]
    fn keep_count_is_an_exact_ceiling() {
        assert_eq!(keep_count(0.2, 1024), 205);
        assert_eq!(keep_count(0.1, 30), 3);
        assert_eq!(keep_count(0.2, 5), 1);
        assert_eq!(keep_count(1.0, 7), 7);
        assert_eq!(keep_count(0.2, 1), 1);
    }

    #[test]
    fn long_sequence_budget() {
        let v = Vocab::default();
        let s = doc(&v, 16384);
        let ex = model_based_corrupt(
            &s,
            &|_: &[TokenId]| 1.0,
            5120.0 / 16384.0,
            0.2,
            &SpanLengths::default(),
            2,
            &v,
        )
        .unwrap();
        assert_eq!(ex.spans.len(), 205);
        assert_eq!(ex.target_corpus_tokens(&v), 1025);
        assert_eq!(ex.decorrupt(&v).unwrap(), s);
    }

    #[test]
    fn constant_oracle_keeps_earliest_spans() {
        let v = Vocab::default();
        let s = doc(&v, 400);
        let (ex, stage1) =
            model_based_corrupt_traced(&s, &|_: &[TokenId]| 0.5, 0.3, 0.2, &SpanLengths::default(), 8, &v).unwrap();
        let n = (stage1.len() as f64 * 0.2).ceil() as usize;
        let kept: Vec<(usize, usize)> = ex.spans.iter().map(|s| (s.start, s.length)).collect();
        assert_eq!(kept, stage1[..n].to_vec());
        let sentinels: Vec<TokenId> = ex.spans.iter().map(|s| s.sentinel_id).collect();
        assert_eq!(sentinels, (0..n).map(|i| v.sentinel(i).unwrap()).collect::<Vec<_>>());
    }

    #[test]
    fn length_oracle_keeps_longest() {
        let v = Vocab::default();
        let s = doc(&v, 500);
        let sampler = SpanLengths::Geometric { mean: 4.0 };
        let (ex, stage1) =
            model_based_corrupt_traced(&s, &|t: &[TokenId]| t.len() as f64, 0.3, 0.25, &sampler, 3, &v).unwrap();
        let mut want = stage1.clone();
        want.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        want.truncate(ex.spans.len());
        want.sort();
        let kept: Vec<(usize, usize)> = ex.spans.iter().map(|s| (s.start, s.length)).collect();
        assert_eq!(kept, want);
    }

    #[test]
    fn non_finite_loss_names_span() {
        let v = Vocab::default();
        let s = doc(&v, 100);
        let err =
            model_based_corrupt(&s, &|_: &[TokenId]| f64::NAN, 0.2, 0.5, &SpanLengths::default(), 0, &v).unwrap_err();
        assert!(matches!(err, ObjectiveError::NonFiniteLoss { index: 0, .. }));
    }
}
