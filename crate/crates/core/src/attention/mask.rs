use std::collections::VecDeque;

use crate::numerics::Mask;

use super::{AttentionConfig, AttentionError, GlobalVisibility};

/// `L × L` attention pattern; row `i` lists the keys query `i` may attend to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttentionMask(Mask);

impl AttentionMask {
    /// Rejects non-square masks and rows without any allowed key.
    pub fn new(mask: Mask) -> Result<Self, AttentionError> {
        if mask.rows() != mask.cols() {
            return Err(AttentionError::InvalidMask(format!(
                "mask must be square, got {}x{}",
                mask.rows(),
                mask.cols()
            )));
        }
        if let Some(row) = (0..mask.rows()).find(|&i| !mask.row(i).iter().any(|&a| a)) {
            return Err(AttentionError::InvalidMask(format!("row {row} has no allowed key")));
        }
        Ok(AttentionMask(mask))
    }

    pub fn full(len: usize) -> Self {
        AttentionMask(Mask::ones(len, len))
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn allowed(&self, query: usize, key: usize) -> bool {
        self.0.get(query, key)
    }

    pub fn as_mask(&self) -> &Mask {
        &self.0
    }

    /// Keys visible to `query`, ascending.
    pub fn keys_of(&self, query: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.allowed(query, k)).collect()
    }

    /// Minimum number of attention hops for information at `from` to reach
    /// `to` (an edge `key → query` for every allowed entry). `None` if
    /// unreachable.
    pub fn hops(&self, from: usize, to: usize) -> Option<usize> {
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([from]);
        dist[from] = 0;
        while let Some(k) = queue.pop_front() {
            if k == to {
                return Some(dist[k]);
            }
            for q in 0..n {
                if self.allowed(q, k) && dist[q] == usize::MAX {
                    dist[q] = dist[k] + 1;
                    queue.push_back(q);
                }
            }
        }
        None
    }

    /// Longest shortest-path over all ordered pairs; `None` if some pair is
    /// disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let n = self.len();
        let mut worst = 0;
        for from in 0..n {
            let mut dist = vec![usize::MAX; n];
            let mut queue = VecDeque::from([from]);
            dist[from] = 0;
            while let Some(k) = queue.pop_front() {
                for q in 0..n {
                    if self.allowed(q, k) && dist[q] == usize::MAX {
                        dist[q] = dist[k] + 1;
                        queue.push_back(q);
                    }
                }
            }
            if dist.contains(&usize::MAX) {
                return None;
            }
            worst = worst.max(dist.into_iter().max().unwrap_or(0));
        }
        Some(worst)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.diameter().is_some()
    }
}

/// Mask for the block pattern described by `cfg`: same-block keys, plus
/// half-neighbour keys in overlap mode, plus global rows/columns.
pub fn build_block_mask(cfg: &AttentionConfig) -> Result<AttentionMask, AttentionError> {
    cfg.validate()?;
    let l = cfg.seq_len;
    let mut mask = Mask::zeros(l, l);
    for b in 0..cfg.num_blocks() {
        let (qs, qe) = cfg.block_range(b);
        let (ks, ke) = cfg.local_window(b);
        for i in qs..qe {
            for j in ks..ke {
                mask.set(i, j, true);
            }
        }
    }
    if cfg.n_global > 0 {
        for t in cfg.global_positions() {
            for j in 0..l {
                mask.set(t, j, true);
                if cfg.global_visibility == GlobalVisibility::Symmetric {
                    mask.set(j, t, true);
                }
            }
        }
    }
    AttentionMask::new(mask)
}
