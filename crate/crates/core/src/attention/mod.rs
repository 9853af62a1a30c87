//! Full attention (the reference), disjoint and overlapping block attention,
//! per-block global tokens and the pooling-augmented attention sub-layer.
//!
//! Each sparse variant has a mask builder so it can be checked against
//! [`full_attention`] under the corresponding [`AttentionMask`].

mod blockwise;
mod config;
mod encoder;
mod flops;
mod mask;
mod pooling;

pub use blockwise::{
    block_attention, context_groups, full_attention, global_block_attention, overlap_block_attention, sparse_attention,
    Attended, ContextGroup,
};
pub use config::{AttentionConfig, GlobalVisibility, Variant};
pub use encoder::{EncoderLayer, PoolingEncoder};
pub use flops::count_score_flops;
pub use mask::{build_block_mask, AttentionMask};
pub use pooling::{pooling_attention_layer, PoolingParams, PoolingVars};

use thiserror::Error;

use crate::numerics::{Graph, NumericsError, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttentionError {
    #[error("invalid attention config: {0}")]
    InvalidConfig(String),
    #[error("invalid attention mask: {0}")]
    InvalidMask(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Forward-only evaluation of one of the Q/K/V variants on plain tensors.
/// Returns the output and the score multiply-accumulate count.
pub fn run_variant(
    variant: Variant,
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    cfg: &AttentionConfig,
) -> Result<(Tensor, u64), AttentionError> {
    let mut g = Graph::new();
    let (qv, kv, vv) = (g.constant(q.clone()), g.constant(k.clone()), g.constant(v.clone()));
    let att = match variant {
        Variant::Full => full_attention(&mut g, qv, kv, vv, &AttentionMask::full(cfg.seq_len))?,
        Variant::Block => block_attention(&mut g, qv, kv, vv, cfg)?,
        Variant::Overlap => overlap_block_attention(&mut g, qv, kv, vv, cfg)?,
        Variant::Global => global_block_attention(&mut g, qv, kv, vv, cfg)?,
        Variant::Pooling => {
            return Err(AttentionError::Precondition(
                "the pooling layer takes X and projections; use pooling_attention_layer",
            ))
        }
    };
    Ok((g.value(att.output).clone(), att.score_macs))
}

/// Forward-only pooling layer on plain tensors.
pub fn run_pooling_layer(
    x: &Tensor,
    params: &PoolingParams,
    cfg: &AttentionConfig,
) -> Result<(Tensor, u64), AttentionError> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let w = PoolingVars {
        wq: g.constant(params.wq.clone()),
        wk: g.constant(params.wk.clone()),
        wv: g.constant(params.wv.clone()),
        wo: g.constant(params.wo.clone()),
    };
    let att = pooling_attention_layer(&mut g, xv, w, cfg)?;
    Ok((g.value(att.output).clone(), att.score_macs))
}
