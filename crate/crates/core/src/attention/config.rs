use serde::{Deserialize, Serialize};

use super::AttentionError;

/// How global tokens participate in the mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalVisibility {
    /// Global tokens attend everywhere and every token attends to them.
    #[default]
    Symmetric,
    /// Global tokens attend everywhere; regular tokens keep their local window.
    RowsOnly,
}

/// Attention variants known to the FLOP model and the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    Block,
    Overlap,
    Global,
    Pooling,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::Block,
        Variant::Overlap,
        Variant::Global,
        Variant::Pooling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Block => "block",
            Variant::Overlap => "overlap",
            Variant::Global => "global",
            Variant::Pooling => "pooling",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub seq_len: usize,
    pub block_size: usize,
    /// Each block also sees half of each neighbouring block.
    pub overlap: bool,
    /// Leading positions of every block that are global.
    pub n_global: usize,
    pub global_visibility: GlobalVisibility,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    pub head_dim: usize,
}

impl AttentionConfig {
    /// Disjoint blocks, no globals, pooling kernel = stride = 1.
    pub fn new(seq_len: usize, block_size: usize, head_dim: usize) -> Self {
        AttentionConfig {
            seq_len,
            block_size,
            overlap: false,
            n_global: 0,
            global_visibility: GlobalVisibility::Symmetric,
            pool_kernel: 1,
            pool_stride: 1,
            head_dim,
        }
    }

    pub fn with_overlap(mut self, overlap: bool) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn with_globals(mut self, n_global: usize) -> Self {
        self.n_global = n_global;
        self
    }

    pub fn with_visibility(mut self, v: GlobalVisibility) -> Self {
        self.global_visibility = v;
        self
    }

    pub fn with_pooling(mut self, kernel: usize, stride: usize) -> Self {
        self.pool_kernel = kernel;
        self.pool_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let bad = |msg: String| Err(AttentionError::InvalidConfig(msg));
        if self.seq_len == 0 {
            return bad("seq_len must be at least 1".into());
        }
        if self.head_dim == 0 {
            return bad("head_dim must be at least 1".into());
        }
        if self.block_size == 0 {
            return bad("block_size must be at least 1".into());
        }
        if self.n_global > self.block_size {
            return bad(format!(
                "n_global ({}) exceeds block_size ({})",
                self.n_global, self.block_size
            ));
        }
        if self.overlap && !self.block_size.is_multiple_of(2) {
            return bad(format!(
                "overlapping windows need an even block_size, got {}",
                self.block_size
            ));
        }
        if self.pool_kernel == 0 || self.pool_stride == 0 {
            return bad("pool_kernel and pool_stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        self.seq_len.div_ceil(self.block_size)
    }

    /// Token range `[start, end)` of block `b`; the last block may be short.
    pub fn block_range(&self, b: usize) -> (usize, usize) {
        let start = b * self.block_size;
        (start, (start + self.block_size).min(self.seq_len))
    }

    pub fn block_of(&self, token: usize) -> usize {
        token / self.block_size
    }

    pub fn is_global(&self, token: usize) -> bool {
        token % self.block_size < self.n_global
    }

    /// Sorted positions of all global tokens.
    pub fn global_positions(&self) -> Vec<usize> {
        (0..self.seq_len).filter(|&t| self.is_global(t)).collect()
    }

    /// Local key window of block `b`: the block itself plus, in overlap mode,
    /// the last half of the left neighbour and the first half of the right.
    pub fn local_window(&self, b: usize) -> (usize, usize) {
        let (start, end) = self.block_range(b);
        if !self.overlap {
            return (start, end);
        }
        let half = self.block_size / 2;
        let lo = if b > 0 { start - half } else { start };
        let hi = if end < self.seq_len {
            (end + half).min(self.seq_len)
        } else {
            end
        };
        (lo, hi)
    }
}
