//! A small stack of block-attention layers where the top `n` layers get a
//! pooling sub-layer after their block self-attention.

use crate::numerics::{Graph, Tensor, Var};

use super::{pooling_attention_layer, sparse_attention, AttentionConfig, AttentionError, PoolingParams, PoolingVars};

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    /// Block self-attention projections, stored in the same shape as the
    /// pooling ones.
    pub self_attn: PoolingParams,
    pub pooling: Option<PoolingParams>,
}

#[derive(Clone, Debug)]
pub struct PoolingEncoder {
    pub cfg: AttentionConfig,
    pub layers: Vec<EncoderLayer>,
}

impl PoolingEncoder {
    /// `n_layers` layers; the last `n_pooling` of them carry a pooling sub-layer.
    pub fn new(cfg: AttentionConfig, n_layers: usize, n_pooling: usize, seed: u64) -> Result<Self, AttentionError> {
        cfg.validate()?;
        if n_pooling > n_layers {
            return Err(AttentionError::InvalidConfig(format!(
                "{n_pooling} pooling layers requested for a {n_layers}-layer stack"
            )));
        }
        let layers = (0..n_layers)
            .map(|i| EncoderLayer {
                self_attn: PoolingParams::random(cfg.head_dim, seed.wrapping_add(2 * i as u64)),
                pooling: (i >= n_layers - n_pooling)
                    .then(|| PoolingParams::random(cfg.head_dim, seed.wrapping_add(2 * i as u64 + 1))),
            })
            .collect();
        Ok(PoolingEncoder { cfg, layers })
    }

    /// Every weight matrix in layer order: self-attention `Wq Wk Wv Wo`, then
    /// pooling `Wq Wk Wv Wo` when present.
    pub fn parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (name, t) in ["wq", "wk", "wv", "wo"].iter().zip(layer.self_attn.as_array()) {
                out.push((format!("layer{i}.attn.{name}"), t.clone()));
            }
            if let Some(p) = &layer.pooling {
                for (name, t) in ["wq", "wk", "wv", "wo"].iter().zip(p.as_array()) {
                    out.push((format!("layer{i}.pool.{name}"), t.clone()));
                }
            }
        }
        out
    }

    /// Forward pass with parameters bound to `weights` (same order as
    /// [`PoolingEncoder::parameters`]).
    pub fn forward_with(&self, g: &mut Graph, x: Var, weights: &[Var]) -> Result<Var, AttentionError> {
        let mut it = weights.iter().copied();
        let mut take = || {
            it.next().ok_or(AttentionError::Precondition(
                "not enough weight handles for the encoder",
            ))
        };
        let mut hidden = x;
        for layer in &self.layers {
            let w = PoolingVars {
                wq: take()?,
                wk: take()?,
                wv: take()?,
                wo: take()?,
            };
            let q = g.matmul(hidden, w.wq)?;
            let k = g.matmul(hidden, w.wk)?;
            let v = g.matmul(hidden, w.wv)?;
            let attn = sparse_attention(g, q, k, v, &self.cfg)?.output;
            let proj = g.matmul(attn, w.wo)?;
            hidden = g.add(hidden, proj)?;
            if layer.pooling.is_some() {
                let pw = PoolingVars {
                    wq: take()?,
                    wk: take()?,
                    wv: take()?,
                    wo: take()?,
                };
                hidden = pooling_attention_layer(g, hidden, pw, &self.cfg)?.output;
            }
        }
        Ok(hidden)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var, AttentionError> {
        let weights: Vec<Var> = self.parameters().into_iter().map(|(_, t)| g.param(t)).collect();
        self.forward_with(g, x, &weights)
    }
}
