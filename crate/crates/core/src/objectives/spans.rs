//! Span-length sampling, non-overlapping placement and the T5 encoding.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::{check_ratio, check_source, CorruptionExample, Objective, ObjectiveError, SpanSpec, TokenId, Vocab};
use crate::seed::rng_for;

/// Default length set for the mixed-span variant.
pub const MIXED_SPAN_LENGTHS: [usize; 4] = [3, 8, 32, 64];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpanLengths {
    Fixed {
        length: usize,
    },
    /// Geometric on `{1, 2, ...}` with the given mean.
    Geometric {
        mean: f64,
    },
    /// Uniform over a set of lengths.
    UniformSet {
        lengths: Vec<usize>,
    },
}

impl Default for SpanLengths {
    fn default() -> Self {
        SpanLengths::Fixed { length: 5 }
    }
}

impl SpanLengths {
    pub fn mixed() -> Self {
        SpanLengths::UniformSet {
            lengths: MIXED_SPAN_LENGTHS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |m: String| Err(ObjectiveError::InvalidSampler(m));
        match self {
            SpanLengths::Fixed { length: 0 } => bad("fixed length must be >= 1".into()),
            SpanLengths::Geometric { mean } if !(*mean >= 1.0 && mean.is_finite()) => {
                bad(format!("geometric mean must be a finite value >= 1, got {mean}"))
            }
            SpanLengths::UniformSet { lengths } if lengths.is_empty() || lengths.contains(&0) => {
                bad(format!("length set must be non-empty and positive, got {lengths:?}"))
            }
            _ => Ok(()),
        }
    }

    /// Expected length of one untruncated draw.
    pub fn mean(&self) -> f64 {
        match self {
            SpanLengths::Fixed { length } => *length as f64,
            SpanLengths::Geometric { mean } => *mean,
            SpanLengths::UniformSet { lengths } => lengths.iter().sum::<usize>() as f64 / lengths.len() as f64,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            SpanLengths::Fixed { length } => *length,
            SpanLengths::Geometric { mean } => {
                let g = Geometric::new(1.0 / mean).expect("validated mean");
                1 + g.sample(rng) as usize
            }
            SpanLengths::UniformSet { lengths } => *lengths.choose(rng).expect("validated set"),
        }
    }
}

/// Draws lengths until they reach `budget`, truncates the last draw so the
/// total is exact, then shuffles so the short span is not always last.
pub fn sample_span_lengths<R: Rng + ?Sized>(
    budget: usize,
    sampler: &SpanLengths,
    rng: &mut R,
) -> Result<Vec<usize>, ObjectiveError> {
    sampler.validate()?;
    let mut lengths = Vec::new();
    let mut total = 0;
    while total < budget {
        let l = sampler.draw(rng).min(budget - total);
        lengths.push(l);
        total += l;
    }
    lengths.shuffle(rng);
    Ok(lengths)
}

/// Places spans of the given lengths (in order) into `len` positions, with
/// at least one unmasked token between consecutive spans. Every valid
/// placement is equally likely. Returns `(start, length)` pairs.
pub fn place_spans<R: Rng + ?Sized>(
    len: usize,
    lengths: &[usize],
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, ObjectiveError> {
    let n = lengths.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let budget: usize = lengths.iter().sum();
    let needed = budget + n - 1;
    if needed > len {
        return Err(ObjectiveError::BudgetUnreachable { budget, spans: n, len });
    }
    // Stars and bars: choose which of the `free + n` slots hold spans.
    let free = len - needed;
    let mut slots = index::sample(rng, free + n, n).into_vec();
    slots.sort_unstable();
    let mut before = 0;
    Ok(slots
        .iter()
        .zip(lengths)
        .map(|(&slot, &l)| {
            let start = slot + before;
            before += l;
            (start, l)
        })
        .collect())
}

/// Stage shared by the T5 variants and model-based denoising: budget
/// `round(ratio · len)`, sampled lengths, uniform placement.
pub fn sample_spans(
    len: usize,
    mask_ratio: f64,
    sampler: &SpanLengths,
    seed: u64,
) -> Result<Vec<(usize, usize)>, ObjectiveError> {
    let budget = (mask_ratio * len as f64).round() as usize;
    let mut rng = rng_for(seed, "spans");
    let lengths = sample_span_lengths(budget, sampler, &mut rng)?;
    place_spans(len, &lengths, &mut rng)
}

/// Replaces each span by its sentinel and builds the target
/// `sentinel_0 span_0 sentinel_1 span_1 ...`. Spans must be sorted and
/// disjoint.
pub fn apply_spans(
    source: &[TokenId],
    spans: &[(usize, usize)],
    objective: Objective,
    vocab: &Vocab,
) -> Result<CorruptionExample, ObjectiveError> {
    if spans.len() > vocab.num_sentinels() as usize {
        return Err(ObjectiveError::OutOfSentinels {
            needed: spans.len(),
            available: vocab.num_sentinels() as usize,
        });
    }
    let mut input = Vec::with_capacity(source.len());
    let mut target = Vec::new();
    let mut specs = Vec::with_capacity(spans.len());
    let mut cursor = 0;
    for (i, &(start, length)) in spans.iter().enumerate() {
        debug_assert!(start >= cursor && length >= 1);
        let sentinel_id = vocab.sentinel(i).expect("checked above");
        input.extend_from_slice(&source[cursor..start]);
        input.push(sentinel_id);
        target.push(sentinel_id);
        target.extend_from_slice(&source[start..start + length]);
        specs.push(SpanSpec {
            start,
            length,
            sentinel_id,
        });
        cursor = start + length;
    }
    input.extend_from_slice(&source[cursor..]);
    Ok(CorruptionExample {
        objective,
        source_ids: source.to_vec(),
        input_ids: input,
        target_ids: target,
        spans: specs,
    })
}

fn corrupt_with(
    objective: Objective,
    source: &[TokenId],
    mask_ratio: f64,
    sampler: &SpanLengths,
    seed: u64,
    vocab: &Vocab,
) -> Result<CorruptionExample, ObjectiveError> {
    check_ratio("mask_ratio", mask_ratio)?;
    check_source(source, vocab)?;
    let spans = sample_spans(source.len(), mask_ratio, sampler, seed)?;
    apply_spans(source, &spans, objective, vocab)
}

/// T5 span denoising. Masks exactly `round(mask_ratio · L)` tokens.
pub fn t5_corrupt(
    source: &[TokenId],
    mask_ratio: f64,
    sampler: &SpanLengths,
    seed: u64,
    vocab: &Vocab,
) -> Result<CorruptionExample, ObjectiveError> {
    corrupt_with(Objective::T5Fixed, source, mask_ratio, sampler, seed, vocab)
}

/// T5 span denoising with lengths drawn uniformly from `lengths`.
pub fn t5_mixed_corrupt(
    source: &[TokenId],
    mask_ratio: f64,
    lengths: &[usize],
    seed: u64,
    vocab: &Vocab,
) -> Result<CorruptionExample, ObjectiveError> {
    let sampler = SpanLengths::UniformSet {
        lengths: lengths.to_vec(),
    };
    corrupt_with(Objective::T5Mixed, source, mask_ratio, &sampler, seed, vocab)
}
