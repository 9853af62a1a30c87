//! Span-corruption pretraining objectives: T5 span denoising with fixed or
//! mixed span lengths, Pegasus primary-sentence masking, and model-based
//! denoising that keeps only the hardest spans. Every example can be undone
//! with [`CorruptionExample::decorrupt`].

mod decorrupt;
mod model_based;
mod pegasus;
mod qa;
mod spans;
mod vocab;

pub use decorrupt::{decorrupt, decorrupt_sentences};
pub use model_based::{model_based_corrupt, model_based_corrupt_traced, SpanLossOracle, UnigramOracle};
pub use pegasus::{pegasus_corrupt, pegasus_scores, pegasus_select, sentence_ranges};
pub use qa::qa_format;
pub use spans::{
    apply_spans, place_spans, sample_span_lengths, sample_spans, t5_corrupt, t5_mixed_corrupt, SpanLengths,
    MIXED_SPAN_LENGTHS,
};
pub use vocab::{TokenId, Vocab, DEFAULT_SENTINELS, DOC_SEPARATOR, FIRST_SENTINEL, MASK_SENTENCE, PAD, QUERY_PREFIX};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    T5Fixed,
    T5Mixed,
    Pegasus,
    ModelBased,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::T5Fixed => "t5_fixed",
            Objective::T5Mixed => "t5_mixed",
            Objective::Pegasus => "pegasus",
            Objective::ModelBased => "model_based",
        }
    }
}

/// A masked span; serialized as `[start, length, sentinel_id]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, TokenId)", into = "(usize, usize, TokenId)")]
pub struct SpanSpec {
    pub start: usize,
    pub length: usize,
    pub sentinel_id: TokenId,
}

impl SpanSpec {
    pub fn end(&self) -> usize {
        self.start + self.length
    }
}

impl From<(usize, usize, TokenId)> for SpanSpec {
    fn from((start, length, sentinel_id): (usize, usize, TokenId)) -> Self {
        SpanSpec {
            start,
            length,
            sentinel_id,
        }
    }
}

impl From<SpanSpec> for (usize, usize, TokenId) {
    fn from(s: SpanSpec) -> Self {
        (s.start, s.length, s.sentinel_id)
    }
}

/// A corrupted input with its decoder target. `source_ids` is not part of
/// the serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionExample {
    pub objective: Objective,
    #[serde(skip)]
    pub source_ids: Vec<TokenId>,
    pub input_ids: Vec<TokenId>,
    pub target_ids: Vec<TokenId>,
    pub spans: Vec<SpanSpec>,
}

impl CorruptionExample {
    /// Rebuilds the source from input and target alone (plus span lengths
    /// for Pegasus, whose mask token does not say how long a sentence was).
    pub fn decorrupt(&self, vocab: &Vocab) -> Result<Vec<TokenId>, ObjectiveError> {
        match self.objective {
            Objective::Pegasus => {
                let lengths: Vec<usize> = self.spans.iter().map(|s| s.length).collect();
                decorrupt_sentences(&self.input_ids, &self.target_ids, &lengths)
            }
            _ => decorrupt(&self.input_ids, &self.target_ids, vocab),
        }
    }

    /// Number of target tokens that are not sentinels or mask tokens.
    pub fn target_corpus_tokens(&self, vocab: &Vocab) -> usize {
        self.target_ids
            .iter()
            .filter(|&&t| !vocab.is_sentinel(t) && t != MASK_SENTENCE)
            .count()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("example serializes")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("{name} must lie in {range}, got {value}")]
    InvalidRatio {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("source token {id} at position {position} is a sentinel or mask id")]
    ReservedToken { position: usize, id: TokenId },
    #[error("cannot place {spans} spans totalling {budget} tokens without overlap in {len} tokens")]
    BudgetUnreachable { budget: usize, spans: usize, len: usize },
    #[error("{needed} spans need sentinels but the vocabulary has {available}")]
    OutOfSentinels { needed: usize, available: usize },
    #[error("invalid span-length sampler: {0}")]
    InvalidSampler(String),
    #[error("invalid sentence boundaries: {0}")]
    InvalidBoundaries(String),
    #[error("a single-sentence document has no remainder to score against")]
    SingleSentence,
    #[error("oracle returned non-finite loss {loss} for span {index} (start {start}, length {length})")]
    NonFiniteLoss {
        index: usize,
        start: usize,
        length: usize,
        loss: f64,
    },
    #[error("unigram oracle needs at least one counted token")]
    EmptyCounts,
    #[error("query of {query_len} tokens plus prefix does not fit in blocks of {block_size}")]
    QueryTooLong { query_len: usize, block_size: usize },
    #[error("target must start with a sentinel, found {found}")]
    TargetWithoutSentinel { found: TokenId },
    #[error("sentinel {found} at input position {position}, expected {expected:?}")]
    SentinelMismatch {
        position: usize,
        expected: Option<TokenId>,
        found: TokenId,
    },
    #[error("sentinel {sentinel} appears out of ascending order")]
    SentinelOrder { sentinel: TokenId },
    #[error("target segment for sentinel {sentinel} is empty")]
    EmptySegment { sentinel: TokenId },
    #[error("target segment for sentinel {sentinel} has no placeholder in the input")]
    UnusedSegment { sentinel: TokenId },
    #[error("input has {masks} sentence masks but {lengths} sentence lengths were given")]
    MaskCountMismatch { masks: usize, lengths: usize },
    #[error("target has {actual} tokens, sentence lengths sum to {expected}")]
    TargetLength { expected: usize, actual: usize },
}

pub(crate) fn check_ratio(name: &'static str, value: f64) -> Result<(), ObjectiveError> {
    if value > 0.0 && value < 0.5 {
        Ok(())
    } else {
        Err(ObjectiveError::InvalidRatio {
            name,
            range: "(0, 0.5)",
            value,
        })
    }
}

/// Sources may carry pad, separator and query-prefix ids, but no sentinel or
/// sentence-mask id, since those would make the corruption ambiguous.
pub(crate) fn check_source(source: &[TokenId], vocab: &Vocab) -> Result<(), ObjectiveError> {
    match source.iter().position(|&t| t == MASK_SENTENCE || vocab.is_sentinel(t)) {
        Some(position) => Err(ObjectiveError::ReservedToken {
            position,
            id: source[position],
        }),
        None => Ok(()),
    }
}
