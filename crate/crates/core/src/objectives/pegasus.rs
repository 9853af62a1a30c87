//! Primary-sentence masking: sentences that overlap most with the rest of
//! the document are replaced by a single mask token and become the target.

use std::collections::HashMap;
use std::ops::Range;

use super::{
    check_ratio, check_source, CorruptionExample, Objective, ObjectiveError, SpanSpec, TokenId, Vocab, MASK_SENTENCE,
};
use crate::rouge::RougeScore;

/// Sentence ranges from start offsets. Offsets must begin at 0, increase
/// strictly and stay below `len`.
pub fn sentence_ranges(len: usize, starts: &[usize]) -> Result<Vec<Range<usize>>, ObjectiveError> {
    let bad = |m: String| Err(ObjectiveError::InvalidBoundaries(m));
    if len == 0 {
        return bad("empty document".into());
    }
    if starts.first() != Some(&0) {
        return bad(format!("first offset must be 0, got {:?}", starts.first()));
    }
    if let Some(w) = starts.windows(2).find(|w| w[0] >= w[1]) {
        return bad(format!("offsets must increase strictly ({} then {})", w[0], w[1]));
    }
    if let Some(&last) = starts.last().filter(|&&s| s >= len) {
        return bad(format!("offset {last} is past the end ({len})"));
    }
    Ok(starts
        .iter()
        .enumerate()
        .map(|(i, &s)| s..starts.get(i + 1).copied().unwrap_or(len))
        .collect())
}

/// ROUGE-1 F1 of every sentence against the concatenation of all the
/// others.
pub fn pegasus_scores(source: &[TokenId], starts: &[usize]) -> Result<Vec<f64>, ObjectiveError> {
    let ranges = sentence_ranges(source.len(), starts)?;
    if ranges.len() < 2 {
        return Err(ObjectiveError::SingleSentence);
    }
    let mut total: HashMap<TokenId, usize> = HashMap::new();
    for &t in source {
        *total.entry(t).or_insert(0) += 1;
    }
    Ok(ranges
        .iter()
        .map(|r| {
            let mut own: HashMap<TokenId, usize> = HashMap::new();
            for &t in &source[r.clone()] {
                *own.entry(t).or_insert(0) += 1;
            }
            // unigram counts of the remainder are total minus own
            let matched = own.iter().map(|(t, &c)| c.min(total[t] - c)).sum();
            RougeScore::from_counts(matched, r.len(), source.len() - r.len()).f1
        })
        .collect())
}

/// Indices (in document order) of the sentences picked greedily by
/// descending score until their total length reaches `target_ratio · L`.
/// Equal scores go to the earlier sentence.
pub fn pegasus_select(source: &[TokenId], starts: &[usize], target_ratio: f64) -> Result<Vec<usize>, ObjectiveError> {
    let scores = pegasus_scores(source, starts)?;
    let ranges = sentence_ranges(source.len(), starts)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let threshold = target_ratio * source.len() as f64;
    let mut picked = Vec::new();
    let mut covered = 0usize;
    for i in order {
        if covered as f64 >= threshold {
            break;
        }
        picked.push(i);
        covered += ranges[i].len();
    }
    picked.sort_unstable();
    Ok(picked)
}

pub fn pegasus_corrupt(
    source: &[TokenId],
    sentence_starts: &[usize],
    target_ratio: f64,
    vocab: &Vocab,
) -> Result<CorruptionExample, ObjectiveError> {
    check_ratio("target_ratio", target_ratio)?;
    check_source(source, vocab)?;
    let ranges = sentence_ranges(source.len(), sentence_starts)?;
    let picked = pegasus_select(source, sentence_starts, target_ratio)?;
    let mut input = Vec::with_capacity(source.len());
    let mut target = Vec::new();
    let mut spans = Vec::with_capacity(picked.len());
    let mut next = picked.iter().peekable();
    for (i, r) in ranges.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            input.push(MASK_SENTENCE);
            target.extend_from_slice(&source[r.clone()]);
            spans.push(SpanSpec {
                start: r.start,
                length: r.len(),
                sentinel_id: MASK_SENTENCE,
            });
        } else {
            input.extend_from_slice(&source[r.clone()]);
        }
    }
    Ok(CorruptionExample {
        objective: Objective::Pegasus,
        source_ids: source.to_vec(),
        input_ids: input,
        target_ids: target,
        spans,
    })
}
