//! Token-level ROUGE-N and ROUGE-L.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    /// Builds a score from a match count and the two denominators; an empty
    /// denominator gives zero for that side.
    pub fn from_counts(matched: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |d: usize| if d == 0 { 0.0 } else { matched as f64 / d as f64 };
        let (precision, recall) = (ratio(candidate_total), ratio(reference_total));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore { precision, recall, f1 }
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram counts.
///
/// # Panics
/// If `n == 0`.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |m: &HashMap<&[T], usize>| m.values().sum::<usize>();
    RougeScore::from_counts(matched, total(&cand), total(&refs))
}

/// Length of the longest common subsequence, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeScore {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}
