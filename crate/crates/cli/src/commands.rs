//! One function per subcommand. Each returns whether its checks passed;
//! data commands always pass once they return `Ok`.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use longseq_core::corpus::{assemble_linked, assemble_random, length_stats, Document, LinkedConfig, Sequence};
use longseq_core::objectives::*;
use longseq_core::seed::{derive_seed, item_seed};
use rayon::prelude::*;

use crate::checks;
use crate::config::{AssemblyMode, Command, ObjectiveKind, RunConfig};
use crate::io::{self, InputDocument};

/// Length of the pseudo-sentences used when a sequence has no usable
/// sentence boundaries.
pub const PSEUDO_SENTENCE: usize = 32;

pub fn run(cfg: &RunConfig) -> Result<bool> {
    match cfg.command {
        Command::Assemble => assemble(cfg).map(|_| true),
        Command::Corrupt => corrupt(cfg).map(|_| true),
        Command::Stats => stats(cfg).map(|_| true),
        Command::AttnCheck => attn_check(cfg),
        Command::GradCheck => grad_check(cfg),
        Command::Bench => bench(cfg).map(|_| true),
    }
}

fn input(cfg: &RunConfig) -> Result<&Path> {
    cfg.input.as_deref().context("--input is required for this command")
}

fn output(cfg: &RunConfig) -> Result<&Path> {
    cfg.output.as_deref().context("--output is required for this command")
}

/// Prints to stdout, or writes to `--output` when it is set.
fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output {
        Some(p) => io::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Reads document lines and tokenizes them into a fresh vocabulary.
/// Documents without any tokens are skipped.
pub fn ingest(path: &Path) -> Result<(Vec<Document>, Vocab)> {
    let docs: Vec<InputDocument> = io::read_jsonl(path)?;
    let mut vocab = Vocab::default();
    let mut store = Vec::with_capacity(docs.len());
    for d in docs {
        let doc = Document::from_text(d.id, &d.text, d.source, &mut vocab);
        if doc.is_empty() {
            log::warn!("skipping empty document {}", doc.id);
            continue;
        }
        store.push(doc);
    }
    log::info!(
        "ingested {} documents, {} distinct words",
        store.len(),
        vocab.corpus_len()
    );
    Ok((store, vocab))
}

fn assemble(cfg: &RunConfig) -> Result<()> {
    let (store, vocab) = ingest(input(cfg)?)?;
    let out = output(cfg)?;
    let a = &cfg.assemble;
    let batch = match a.mode {
        AssemblyMode::Random => assemble_random(&store, cfg.seq_len, derive_seed(cfg.seed, "assemble"))?,
        AssemblyMode::Linked => assemble_linked(
            &store,
            &LinkedConfig {
                seq_len: cfg.seq_len,
                clusters: a.clusters,
                top_k: a.top_k,
                dim: a.embed_dim,
                max_iters: a.kmeans_iters,
                seed: derive_seed(cfg.seed, "assemble"),
            },
        )?,
    };
    log::info!(
        "{} sequences of {} tokens; {} dropped tokens, {} discarded sequences",
        batch.sequences.len(),
        cfg.seq_len,
        batch.diagnostics.dropped_tokens,
        batch.diagnostics.discarded_sequences
    );
    io::write_text(out, &batch.to_json_lines())?;
    io::write_text(
        &io::sidecar_path(out, "diagnostics.json"),
        &serde_json::to_string(&batch.diagnostics)?,
    )?;
    io::write_vocab(out, &vocab)
}

/// Sentence starts from separators and sentence-final words; falls back to
/// fixed-size pseudo-sentences when that yields fewer than two.
pub fn sentence_starts(tokens: &[TokenId], vocab: &Vocab) -> Vec<usize> {
    let mut starts = vec![0];
    for (i, &t) in tokens.iter().enumerate().take(tokens.len().saturating_sub(1)) {
        let ends = t == DOC_SEPARATOR || vocab.word_of(t).is_some_and(|w| w.ends_with(['.', '!', '?']));
        if ends {
            starts.push(i + 1);
        }
    }
    if starts.len() < 2 {
        starts = (0..tokens.len()).step_by(PSEUDO_SENTENCE).collect();
    }
    starts
}

fn corrupt(cfg: &RunConfig) -> Result<()> {
    let in_path = input(cfg)?;
    let out = output(cfg)?;
    let sequences: Vec<Sequence> = io::read_jsonl(in_path)?;
    let vocab = io::read_vocab(in_path)?;
    let s = cfg.seq_len;
    let sources: Vec<&[TokenId]> = sequences
        .iter()
        .enumerate()
        .map(|(i, q)| {
            ensure!(
                q.tokens.len() >= s,
                "line {}: sequence has {} tokens, fewer than --seq-len {s}",
                i + 1,
                q.tokens.len()
            );
            Ok(&q.tokens[..s])
        })
        .collect::<Result<_>>()?;
    let c = &cfg.corrupt;
    let oracle = match c.objective {
        ObjectiveKind::ModelBased => Some(UnigramOracle::from_tokens(sources.iter().copied(), None)?),
        _ => None,
    };
    let mixed = match (&c.objective, &c.span_lengths) {
        (ObjectiveKind::T5Mixed, SpanLengths::UniformSet { lengths }) => lengths.clone(),
        _ => MIXED_SPAN_LENGTHS.to_vec(),
    };
    let examples: Vec<CorruptionExample> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| {
            let seed = item_seed(cfg.seed, "corrupt", i);
            let ex = match c.objective {
                ObjectiveKind::T5 => t5_corrupt(src, c.mask_ratio, &c.span_lengths, seed, &vocab),
                ObjectiveKind::T5Mixed => t5_mixed_corrupt(src, c.mask_ratio, &mixed, seed, &vocab),
                ObjectiveKind::Pegasus => pegasus_corrupt(src, &sentence_starts(src, &vocab), c.mask_ratio, &vocab),
                ObjectiveKind::ModelBased => model_based_corrupt(
                    src,
                    oracle.as_ref().expect("built above"),
                    c.mask_ratio,
                    c.keep_fraction,
                    &c.span_lengths,
                    seed,
                    &vocab,
                ),
            };
            ex.with_context(|| format!("line {}", i + 1))
        })
        .collect::<Result<_>>()?;
    io::write_jsonl(out, &examples)?;
    io::write_vocab(out, &vocab)
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let (store, _) = ingest(input(cfg)?)?;
    emit(
        cfg,
        &format!("{}\n", serde_json::to_string_pretty(&length_stats(&store))?),
    )
}

fn attn_check(cfg: &RunConfig) -> Result<bool> {
    let c = &cfg.checks;
    let report = checks::attention_equivalence(c.max_len, c.trials, derive_seed(cfg.seed, "attn-check"))?;
    for f in &report.families {
        eprintln!(
            "{:<9} {} configs, max error {:.3e} (tol {:e}): {}",
            f.family.name(),
            f.configs,
            f.max_error,
            f.tolerance,
            if f.failures.is_empty() { "ok" } else { "FAILED" }
        );
    }
    emit(cfg, &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
    Ok(report.passed())
}

fn grad_check(cfg: &RunConfig) -> Result<bool> {
    let results = checks::gradient_suite(cfg.checks.grad_seeds, derive_seed(cfg.seed, "grad-check"))?;
    for r in &results {
        eprintln!(
            "{:<8} {} seeds, max relative error {:.3e} (tol {:e}, h {:e}): {}",
            r.variant.name(),
            r.seeds,
            r.max_relative_error,
            r.tolerance,
            r.step,
            if r.passed() {
                "ok".to_string()
            } else {
                format!("{} seeds FAILED", r.failures.len())
            }
        );
    }
    emit(cfg, &format!("{}\n", serde_json::to_string_pretty(&results)?))?;
    Ok(results.iter().all(|r| r.passed()))
}

fn bench(cfg: &RunConfig) -> Result<()> {
    let b = &cfg.bench;
    if b.min_len > b.max_len {
        bail!("bench min_len {} exceeds max_len {}", b.min_len, b.max_len);
    }
    let rows = checks::bench_sweep(&cfg.attention, b.min_len, b.max_len, derive_seed(cfg.seed, "bench"))?;
    let mut text = String::new();
    for r in &rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    emit(cfg, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentences_from_words_and_separators() {
        let mut v = Vocab::default();
        let toks: Vec<TokenId> = "a b. c d! e".split(' ').map(|w| v.intern(w)).collect();
        assert_eq!(sentence_starts(&toks, &v), vec![0, 2, 4]);
        let mut with_sep = toks.clone();
        with_sep.insert(1, DOC_SEPARATOR);
        assert_eq!(sentence_starts(&with_sep, &v), vec![0, 2, 3, 5]);
        // trailing terminator does not open an empty sentence
        let t: Vec<TokenId> = "x y.".split(' ').map(|w| v.intern(w)).collect();
        let flat: Vec<TokenId> = t.iter().cycle().take(70).copied().collect();
        assert_eq!(sentence_starts(&t, &v), vec![0]);
        assert!(sentence_starts(&flat, &v).len() > 2);
        let plain: Vec<TokenId> = (0..70).map(|_| v.intern("w")).collect();
        assert_eq!(sentence_starts(&plain, &v), vec![0, 32, 64]);
    }
}
