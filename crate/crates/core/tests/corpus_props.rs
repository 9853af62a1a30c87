use std::collections::HashMap;

use longseq_core::corpus::*;
use longseq_core::objectives::{TokenId, DOC_SEPARATOR};
use proptest::prelude::*;

fn store_from(lens: &[(usize, u32)]) -> Vec<Document> {
    lens.iter()
        .enumerate()
        .map(|(i, &(len, base))| {
            let tokens = (0..len as u32).map(|k| 5000 + (base + k * 3) % 60).collect();
            Document::new(format!("doc{i}"), tokens, if i % 2 == 0 { "even" } else { "odd" })
        })
        .collect()
}

fn multiset(tokens: impl Iterator<Item = TokenId>) -> HashMap<TokenId, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_assembly_conserves_tokens(
        lens in prop::collection::vec((1usize..40, 0u32..60), 1..30),
        s in 1usize..64,
        seed in any::<u64>(),
    ) {
        let store = store_from(&lens);
        let total: usize = store.iter().map(Document::len).sum();
        let Ok(batch) = assemble_random(&store, s, seed) else {
            prop_assert!(total < s);
            return Ok(());
        };
        verify_tiling(&batch, &store).map_err(TestCaseError::fail)?;
        let emitted: usize = batch.sequences.iter().map(|q| q.tokens.len()).sum();
        prop_assert_eq!(emitted + batch.diagnostics.dropped_tokens, total + store.len() - 1);

        // emitted tokens plus the dropped tail equal the input multiset
        let mut covered: HashMap<&str, Vec<bool>> = store.iter().map(|d| (d.id.as_str(), vec![false; d.len()])).collect();
        for q in &batch.sequences {
            for p in &q.provenance {
                for c in &mut covered.get_mut(p.doc_id.as_str()).unwrap()[p.start..p.end] {
                    prop_assert!(!*c);
                    *c = true;
                }
            }
        }
        let out = multiset(batch.sequences.iter().flat_map(|q| q.tokens.iter().copied()).filter(|&t| t != DOC_SEPARATOR));
        let dropped = multiset(store.iter().flat_map(|d| {
            let c = &covered[d.id.as_str()];
            d.tokens.iter().zip(c.clone()).filter(|(_, c)| !c).map(|(&t, _)| t).collect::<Vec<_>>()
        }));
        let mut both = out;
        for (t, n) in dropped {
            *both.entry(t).or_insert(0) += n;
        }
        prop_assert_eq!(both, multiset(store.iter().flat_map(|d| d.tokens.iter().copied())));
    }

    #[test]
    fn linked_assembly_respects_usage_cap(
        lens in prop::collection::vec((1usize..30, 0u32..60), 4..40),
        s in 4usize..48,
        k in 1usize..5,
        top_k in 1usize..8,
        seed in any::<u64>(),
    ) {
        let store = store_from(&lens);
        let cfg = LinkedConfig { seq_len: s, clusters: k, top_k, dim: 32, max_iters: 20, seed };
        if let Ok(batch) = assemble_linked(&store, &cfg) {
            verify_tiling(&batch, &store).map_err(TestCaseError::fail)?;
            prop_assert!(batch.usage_counts().values().all(|&u| u <= 2));
            prop_assert_eq!(batch.diagnostics.max_pair_similarity.len(), batch.sequences.len());
        }
    }

    #[test]
    fn embedding_is_unit_norm_and_order_free(tokens in prop::collection::vec(5000u32..5100, 1..300), dim in 8usize..64) {
        let d = Document::new("d", tokens.clone(), "t");
        let e = embed_document(&d, dim).unwrap();
        let norm: f64 = e.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-9);
        let mut rev = tokens;
        rev.reverse();
        prop_assert_eq!(e.vector, embed_document(&Document::new("d", rev, "t"), dim).unwrap().vector);
    }

    #[test]
    fn stats_totals_are_exact(lens in prop::collection::vec((1usize..500, 0u32..60), 1..50)) {
        let store = store_from(&lens);
        let stats = length_stats(&store);
        let count: usize = stats.per_tag.values().map(|t| t.count).sum();
        prop_assert_eq!(count, store.len());
        for (tag, t) in &stats.per_tag {
            let lens: Vec<u64> = store.iter().filter(|d| &d.source_tag == tag).map(|d| d.len() as u64).collect();
            prop_assert_eq!(t.total_tokens, lens.iter().sum::<u64>());
            prop_assert_eq!(t.histogram.iter().map(|b| b.count).sum::<usize>(), t.count);
            prop_assert!((t.mean * t.count as f64 - t.total_tokens as f64).abs() < 1e-9 * t.total_tokens as f64);
        }
    }
}

#[test]
fn ten_document_cluster_order_matches_brute_force() {
    let store: Vec<Document> = (0..10)
        .map(|i| {
            let tokens = (0..20).map(|k| 5000 + (i * 5 + k * (i + 1)) % 40).collect();
            Document::new(format!("d{i}"), tokens, "t")
        })
        .collect();
    let vectors: Vec<Vec<f64>> = store.iter().map(|d| embed_document(d, 64).unwrap().vector).collect();
    let members: Vec<usize> = (0..10).collect();
    // oracle: the full pairwise similarity table (unit vectors, so plain
    // dot products), then a stable descending sort per row
    let table: Vec<Vec<f64>> = vectors
        .iter()
        .map(|a| {
            vectors
                .iter()
                .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect();
    for (seed, row) in table.iter().enumerate() {
        let got: Vec<usize> = ranked_neighbors(seed, &members, &vectors, 10)
            .into_iter()
            .map(|x| x.0)
            .collect();
        let mut want: Vec<usize> = (0..10).filter(|&j| j != seed).collect();
        want.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn random_assembly_example_from_four_short_docs() {
    let store: Vec<Document> = (0..4)
        .map(|i| Document::new(format!("d{i}"), (0..5).map(|k| 5000 + 10 * i + k).collect(), "t"))
        .collect();
    let batch = assemble_random(&store, 12, 9).unwrap();
    assert_eq!(batch.sequences.len(), 1);
    assert_eq!(
        batch.sequences[0]
            .tokens
            .iter()
            .filter(|&&t| t == DOC_SEPARATOR)
            .count(),
        2
    );
}
