use crate::numerics::pooled_len;

use super::{AttentionConfig, AttentionError, GlobalVisibility, Variant};

/// Global tokens among positions `[0, x)`.
fn globals_below(cfg: &AttentionConfig, x: usize) -> usize {
    let b = cfg.block_size;
    (x / b) * cfg.n_global + (x % b).min(cfg.n_global)
}

/// `(block range, local window)` for every block.
fn blocks(c: &AttentionConfig) -> impl Iterator<Item = ((usize, usize), (usize, usize))> + '_ {
    (0..c.num_blocks()).map(move |b| (c.block_range(b), c.local_window(b)))
}

fn globals_in(cfg: &AttentionConfig, lo: usize, hi: usize) -> usize {
    globals_below(cfg, hi) - globals_below(cfg, lo)
}

/// Multiply-accumulate count of the score computation (`QKᵀ`) of `variant`.
///
/// * full: `L²h`
/// * block: `Σ B_i² h` over (possibly short) blocks
/// * overlap: `Σ B_i · |window_i| · h`
/// * global: regular rows see `window ∪ globals`, global rows see all `L`
/// * pooling: `L · ceil(L / stride) · h`
pub fn count_score_flops(variant: Variant, cfg: &AttentionConfig) -> Result<u64, AttentionError> {
    cfg.validate()?;
    let (l, h) = (cfg.seq_len as u64, cfg.head_dim as u64);
    let total = match variant {
        Variant::Full => l * l * h,
        Variant::Pooling => l * pooled_len(cfg.seq_len, cfg.pool_stride) as u64 * h,
        Variant::Block => {
            let c = AttentionConfig {
                overlap: false,
                ..cfg.clone()
            };
            blocks(&c).map(|((s, e), _)| ((e - s) as u64).pow(2) * h).sum()
        }
        Variant::Overlap => {
            let c = AttentionConfig {
                overlap: true,
                ..cfg.clone()
            };
            c.validate()?;
            blocks(&c)
                .map(|((s, e), (ws, we))| (e - s) as u64 * (we - ws) as u64 * h)
                .sum()
        }
        Variant::Global => {
            let total_globals = globals_below(cfg, cfg.seq_len);
            blocks(cfg)
                .map(|((s, e), (ws, we))| {
                    let global_rows = globals_in(cfg, s, e);
                    let regular_rows = (e - s) - global_rows;
                    let window = we - ws;
                    let context = match cfg.global_visibility {
                        GlobalVisibility::Symmetric => window + total_globals - globals_in(cfg, ws, we),
                        GlobalVisibility::RowsOnly => window,
                    };
                    (regular_rows * context + global_rows * cfg.seq_len) as u64 * h
                })
                .sum()
        }
    };
    Ok(total)
}
