use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Document;

/// Lengths in `[lo, hi)`; bins are powers of two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub total_tokens: u64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub per_tag: BTreeMap<String, TagStats>,
}

fn tag_stats(mut lengths: Vec<usize>) -> TagStats {
    lengths.sort_unstable();
    let count = lengths.len();
    let total_tokens: u64 = lengths.iter().map(|&l| l as u64).sum();
    let median = if count % 2 == 1 {
        lengths[count / 2] as f64
    } else {
        (lengths[count / 2 - 1] + lengths[count / 2]) as f64 / 2.0
    };
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in &lengths {
        *bins.entry(l.max(1).ilog2()).or_insert(0) += 1;
    }
    let histogram = bins
        .into_iter()
        .map(|(k, count)| HistogramBin {
            lo: if k == 0 { 0 } else { 1 << k },
            hi: 1 << (k + 1),
            count,
        })
        .collect();
    TagStats {
        count,
        mean: total_tokens as f64 / count as f64,
        median,
        total_tokens,
        histogram,
    }
}

/// Exact per-source count, mean, median and log2 histogram of document
/// lengths.
pub fn length_stats(store: &[Document]) -> LengthStats {
    let mut by_tag: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for d in store {
        by_tag.entry(d.source_tag.clone()).or_default().push(d.len());
    }
    LengthStats {
        per_tag: by_tag.into_iter().map(|(t, l)| (t, tag_stats(l))).collect(),
    }
}
