//! Pooling-augmented attention sub-layer.
//!
//! `out = X + softmax(Q K̃ᵀ / √h) Ṽ Wo` where `Q = X Wq` and `K̃`, `Ṽ` are the
//! row-average-pooled `X Wk`, `X Wv`. Scores are `L × ceil(L / stride)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::{Graph, Tensor, Var};

use super::{Attended, AttentionConfig, AttentionError};

/// The four freshly initialised projections of the pooling sub-layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolingParams {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
}

impl PoolingParams {
    /// Uniform `±1/√h` initialisation from `seed`.
    pub fn random(head_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (head_dim as f64).sqrt();
        let mut next = || {
            let data = (0..head_dim * head_dim).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::matrix(head_dim, head_dim, data).expect("square projection")
        };
        PoolingParams {
            wq: next(),
            wk: next(),
            wv: next(),
            wo: next(),
        }
    }

    pub fn as_array(&self) -> [&Tensor; 4] {
        [&self.wq, &self.wk, &self.wv, &self.wo]
    }
}

/// Graph handles for the four projections.
#[derive(Clone, Copy, Debug)]
pub struct PoolingVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
}

impl PoolingVars {
    pub fn params(g: &mut Graph, p: &PoolingParams) -> Self {
        PoolingVars {
            wq: g.param(p.wq.clone()),
            wk: g.param(p.wk.clone()),
            wv: g.param(p.wv.clone()),
            wo: g.param(p.wo.clone()),
        }
    }
}

pub fn pooling_attention_layer(
    g: &mut Graph,
    x: Var,
    w: PoolingVars,
    cfg: &AttentionConfig,
) -> Result<Attended, AttentionError> {
    cfg.validate()?;
    let shape = g.value(x).shape().to_vec();
    if shape.len() != 2 || shape[1] != cfg.head_dim {
        return Err(AttentionError::Shape(format!(
            "X has shape {shape:?}, expected [L, {}]",
            cfg.head_dim
        )));
    }
    for (name, m) in [("Wq", w.wq), ("Wk", w.wk), ("Wv", w.wv), ("Wo", w.wo)] {
        if g.value(m).shape() != [cfg.head_dim, cfg.head_dim] {
            return Err(AttentionError::Shape(format!(
                "{name} has shape {:?}, expected [{h}, {h}]",
                g.value(m).shape(),
                h = cfg.head_dim
            )));
        }
    }
    let q = g.matmul(x, w.wq)?;
    let k = g.matmul(x, w.wk)?;
    let v = g.matmul(x, w.wv)?;
    let k_pooled = g.avg_pool_rows(k, cfg.pool_kernel, cfg.pool_stride)?;
    let v_pooled = g.avg_pool_rows(v, cfg.pool_kernel, cfg.pool_stride)?;
    let kt = g.transpose(k_pooled)?;
    let before = g.macs();
    let raw = g.matmul(q, kt)?;
    let score_macs = g.macs() - before;
    let scores = g.scale(raw, 1.0 / (cfg.head_dim as f64).sqrt());
    let probs = g.softmax(scores)?;
    let attended = g.matmul(probs, v_pooled)?;
    let projected = g.matmul(attended, w.wo)?;
    let output = g.add(x, projected)?;
    Ok(Attended { output, score_macs })
}
