//! Full attention and its blockwise variants.
//!
//! The blockwise variants never build an `L × L` score matrix. Queries are
//! grouped by the exact key set they may see, and each group runs dense
//! attention over its gathered keys and values.

use crate::numerics::{Graph, Var};

use super::{AttentionConfig, AttentionError, AttentionMask, GlobalVisibility};

/// Output of an attention call plus the multiply-accumulates spent on scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Attended {
    pub output: Var,
    pub score_macs: u64,
}

/// Query rows sharing one key/value context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextGroup {
    pub queries: Vec<usize>,
    pub keys: Vec<usize>,
}

fn check_qkv(g: &Graph, q: Var, k: Var, v: Var) -> Result<(usize, usize), AttentionError> {
    let shape = g.value(q).shape().to_vec();
    if shape.len() != 2 {
        return Err(AttentionError::Shape(format!("Q must be 2-D, got {shape:?}")));
    }
    for (name, t) in [("K", k), ("V", v)] {
        if g.value(t).shape() != shape.as_slice() {
            return Err(AttentionError::Shape(format!(
                "{name} has shape {:?}, Q has {shape:?}",
                g.value(t).shape()
            )));
        }
    }
    Ok((shape[0], shape[1]))
}

/// `softmax(QKᵀ/√h, mask) · V` over the whole sequence.
pub fn full_attention(g: &mut Graph, q: Var, k: Var, v: Var, mask: &AttentionMask) -> Result<Attended, AttentionError> {
    let (l, h) = check_qkv(g, q, k, v)?;
    if mask.len() != l {
        return Err(AttentionError::Shape(format!(
            "mask is {}x{} for sequence length {l}",
            mask.len(),
            mask.len()
        )));
    }
    let kt = g.transpose(k)?;
    let before = g.macs();
    let raw = g.matmul(q, kt)?;
    let score_macs = g.macs() - before;
    let scores = g.scale(raw, 1.0 / (h as f64).sqrt());
    let probs = g.masked_softmax(scores, mask.as_mask())?;
    let output = g.matmul(probs, v)?;
    Ok(Attended { output, score_macs })
}

/// Partition of the queries of `cfg` into groups with identical key sets.
/// Within a block, regular tokens share the local window (plus every global
/// token under symmetric visibility); global tokens see the whole sequence.
pub fn context_groups(cfg: &AttentionConfig) -> Result<Vec<ContextGroup>, AttentionError> {
    cfg.validate()?;
    let globals = if cfg.n_global > 0 && cfg.global_visibility == GlobalVisibility::Symmetric {
        cfg.global_positions()
    } else {
        Vec::new()
    };
    let mut groups = Vec::new();
    for b in 0..cfg.num_blocks() {
        let (qs, qe) = cfg.block_range(b);
        let (ws, we) = cfg.local_window(b);
        let (global_q, regular_q): (Vec<usize>, Vec<usize>) = (qs..qe).partition(|&t| cfg.is_global(t));
        if !regular_q.is_empty() {
            let mut keys: Vec<usize> = (ws..we).collect();
            keys.extend(globals.iter().copied().filter(|&t| t < ws || t >= we));
            keys.sort_unstable();
            groups.push(ContextGroup {
                queries: regular_q,
                keys,
            });
        }
        if !global_q.is_empty() {
            groups.push(ContextGroup {
                queries: global_q,
                keys: (0..cfg.seq_len).collect(),
            });
        }
    }
    Ok(groups)
}

fn grouped_attention(g: &mut Graph, q: Var, k: Var, v: Var, cfg: &AttentionConfig) -> Result<Attended, AttentionError> {
    let (l, h) = check_qkv(g, q, k, v)?;
    if l != cfg.seq_len || h != cfg.head_dim {
        return Err(AttentionError::Shape(format!(
            "inputs are {l}x{h}, config expects {}x{}",
            cfg.seq_len, cfg.head_dim
        )));
    }
    let scale = 1.0 / (h as f64).sqrt();
    let mut score_macs = 0;
    let mut parts = Vec::new();
    for group in context_groups(cfg)? {
        let qb = g.select_rows(q, &group.queries)?;
        let kb = g.select_rows(k, &group.keys)?;
        let vb = g.select_rows(v, &group.keys)?;
        let kt = g.transpose(kb)?;
        let before = g.macs();
        let raw = g.matmul(qb, kt)?;
        score_macs += g.macs() - before;
        let scores = g.scale(raw, scale);
        let probs = g.softmax(scores)?;
        let out = g.matmul(probs, vb)?;
        parts.push((out, group.queries));
    }
    let output = g.scatter_rows(l, parts)?;
    Ok(Attended { output, score_macs })
}

/// Disjoint block attention.
pub fn block_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    cfg: &AttentionConfig,
) -> Result<Attended, AttentionError> {
    if cfg.overlap || cfg.n_global != 0 {
        return Err(AttentionError::Precondition(
            "block_attention needs overlap = false and n_global = 0",
        ));
    }
    grouped_attention(g, q, k, v, cfg)
}

/// Block attention whose key/value context is
/// `[left half-block ‖ own block ‖ right half-block]`.
pub fn overlap_block_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    cfg: &AttentionConfig,
) -> Result<Attended, AttentionError> {
    if !cfg.overlap {
        return Err(AttentionError::Precondition(
            "overlap_block_attention needs overlap = true",
        ));
    }
    grouped_attention(g, q, k, v, cfg)
}

/// Block attention with the first `n_global` tokens of every block global.
/// Global and regular tokens share the same Q/K/V projections.
pub fn global_block_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    cfg: &AttentionConfig,
) -> Result<Attended, AttentionError> {
    if cfg.n_global == 0 {
        return Err(AttentionError::Precondition(
            "global_block_attention needs n_global >= 1",
        ));
    }
    grouped_attention(g, q, k, v, cfg)
}

/// Dispatches on the pattern in `cfg` (block, overlap, global or a
/// combination).
pub fn sparse_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    cfg: &AttentionConfig,
) -> Result<Attended, AttentionError> {
    grouped_attention(g, q, k, v, cfg)
}
