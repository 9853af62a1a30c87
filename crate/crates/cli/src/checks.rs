//! The attention equivalence suite, the finite-difference gradient suite and
//! the score-FLOP benchmark sweep.

use std::collections::BTreeMap;
use std::time::Instant;

use longseq_core::attention::*;
use longseq_core::numerics::{
    finite_difference_check_weighted, pooled_len, Graph, NamedParam, NumericsError, Tensor, Var,
};
use longseq_core::seed::rng_for;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::AttentionParams;

pub const EQUIVALENCE_TOL: f64 = 1e-10;
pub const COLLAPSE_TOL: f64 = 1e-12;
pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("positive shape")
}

/// Equivalence families; `Collapse` is block attention with `B >= L`
/// against unmasked full attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Block,
    Overlap,
    Global,
    Pooling,
    Collapse,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Block,
        Family::Overlap,
        Family::Global,
        Family::Pooling,
        Family::Collapse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Block => "block",
            Family::Overlap => "overlap",
            Family::Global => "global",
            Family::Pooling => "pooling",
            Family::Collapse => "collapse",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Family::Collapse => COLLAPSE_TOL,
            _ => EQUIVALENCE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: Family,
    pub configs: usize,
    pub tolerance: f64,
    pub max_error: f64,
    pub failures: Vec<TrialFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub config: AttentionConfig,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub families: Vec<FamilyResult>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(|f| f.failures.is_empty())
    }

    pub fn configs(&self) -> usize {
        self.families.iter().map(|f| f.configs).sum()
    }
}

/// Direct loop evaluation of `X + softmax(Q K̃ᵀ/√h) Ṽ Wo`.
pub fn loop_pooling_layer(x: &Tensor, p: &PoolingParams, kernel: usize, stride: usize) -> Vec<f64> {
    let (l, h) = (x.rows(), x.cols());
    let project = |w: &Tensor, r: usize| -> Vec<f64> {
        (0..h)
            .map(|c| (0..h).map(|k| x.get(r, k) * w.get(k, c)).sum())
            .collect()
    };
    let pooled = |w: &Tensor| -> Vec<Vec<f64>> {
        (0..pooled_len(l, stride))
            .map(|win| {
                let (lo, hi) = (win * stride, (win * stride + kernel).min(l));
                let mut acc = vec![0.0; h];
                for r in lo..hi {
                    for (a, v) in acc.iter_mut().zip(project(w, r)) {
                        *a += v;
                    }
                }
                acc.iter().map(|a| a / (hi - lo) as f64).collect()
            })
            .collect()
    };
    let (keys, values) = (pooled(&p.wk), pooled(&p.wv));
    let mut out = Vec::with_capacity(l * h);
    for i in 0..l {
        let q = project(&p.wq, i);
        let scores: Vec<f64> = keys
            .iter()
            .map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / (h as f64).sqrt())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = e.iter().sum();
        let attended: Vec<f64> = (0..h)
            .map(|c| e.iter().zip(&values).map(|(w, v)| w / z * v[c]).sum())
            .collect();
        for c in 0..h {
            let proj: f64 = (0..h).map(|k| attended[k] * p.wo.get(k, c)).sum();
            out.push(x.get(i, c) + proj);
        }
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn draw_config(family: Family, max_len: usize, rng: &mut ChaCha8Rng) -> AttentionConfig {
    let h = rng.gen_range(1..=8);
    match family {
        Family::Block => {
            let l = rng.gen_range(1..=max_len);
            AttentionConfig::new(l, rng.gen_range(1..=l), h)
        }
        Family::Overlap => {
            let l = rng.gen_range(2..=max_len.max(2));
            AttentionConfig::new(l, 2 * rng.gen_range(1..=l / 2), h).with_overlap(true)
        }
        Family::Global => {
            let l = rng.gen_range(1..=max_len);
            let b = rng.gen_range(1..=l);
            let visibility = if rng.gen_bool(0.5) {
                GlobalVisibility::Symmetric
            } else {
                GlobalVisibility::RowsOnly
            };
            AttentionConfig::new(l, b, h)
                .with_overlap(b % 2 == 0 && rng.gen_bool(0.5))
                .with_globals(rng.gen_range(1..=b))
                .with_visibility(visibility)
        }
        Family::Pooling => {
            let l = rng.gen_range(1..=max_len);
            AttentionConfig::new(l, l, h).with_pooling(rng.gen_range(1..=8), rng.gen_range(1..=8))
        }
        Family::Collapse => {
            let l = rng.gen_range(1..=max_len);
            AttentionConfig::new(l, l + rng.gen_range(0..=2), h)
        }
    }
}

fn run_trial(
    family: Family,
    max_len: usize,
    seed: u64,
    trial: usize,
) -> Result<(AttentionConfig, f64), AttentionError> {
    let mut rng = rng_for(seed, &format!("attn-check/{}#{trial}", family.name()));
    let cfg = draw_config(family, max_len, &mut rng);
    let (l, h) = (cfg.seq_len, cfg.head_dim);
    if family == Family::Pooling {
        let x = random(&mut rng, l, h);
        let p = PoolingParams::random(h, rng.gen());
        let (got, _) = run_pooling_layer(&x, &p, &cfg)?;
        let want = loop_pooling_layer(&x, &p, cfg.pool_kernel, cfg.pool_stride);
        return Ok((cfg, max_diff(got.data(), &want)));
    }
    let (q, k, v) = (random(&mut rng, l, h), random(&mut rng, l, h), random(&mut rng, l, h));
    let variant = match family {
        Family::Block | Family::Collapse => Variant::Block,
        Family::Overlap => Variant::Overlap,
        _ => Variant::Global,
    };
    let (got, _) = run_variant(variant, &q, &k, &v, &cfg)?;
    let mask = if family == Family::Collapse {
        AttentionMask::full(l)
    } else {
        build_block_mask(&cfg)?
    };
    let mut g = Graph::new();
    let (qv, kv, vv) = (g.constant(q), g.constant(k), g.constant(v));
    let reference = full_attention(&mut g, qv, kv, vv, &mask)?;
    Ok((
        cfg,
        got.max_abs_diff(g.value(reference.output)).unwrap_or(f64::INFINITY),
    ))
}

/// `trials` random configurations with `L <= max_len` for every family,
/// each compared with its oracle.
pub fn attention_equivalence(max_len: usize, trials: usize, seed: u64) -> Result<EquivalenceReport, AttentionError> {
    if max_len == 0 {
        return Err(AttentionError::InvalidConfig("max_len must be >= 1".into()));
    }
    let mut families = Vec::new();
    for family in Family::ALL {
        let results: Vec<(AttentionConfig, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(family, max_len, seed, t))
            .collect::<Result<_, _>>()?;
        let tolerance = family.tolerance();
        families.push(FamilyResult {
            family,
            configs: results.len(),
            tolerance,
            max_error: results.iter().map(|r| r.1).fold(0.0, f64::max),
            failures: results
                .into_iter()
                .enumerate()
                .filter(|(_, (_, e))| e.is_nan() || *e > tolerance)
                .map(|(trial, (config, error))| TrialFailure { trial, config, error })
                .collect(),
        });
    }
    Ok(EquivalenceReport { families })
}

/// Fixed shapes of the gradient suite: eight tokens, head size two, blocks
/// of four, one global per block, pooling kernel and stride two.
pub fn gradient_config(variant: Variant) -> AttentionConfig {
    let base = AttentionConfig::new(8, 4, 2);
    match variant {
        Variant::Full | Variant::Block => base,
        Variant::Overlap => base.with_overlap(true),
        Variant::Global => base.with_globals(1),
        Variant::Pooling => AttentionConfig::new(8, 8, 2).with_pooling(2, 2),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed_index: usize,
    pub param: String,
    pub element: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientResult {
    pub variant: Variant,
    pub seeds: usize,
    pub step: f64,
    pub tolerance: f64,
    pub max_relative_error: f64,
    pub per_parameter_max: BTreeMap<String, f64>,
    pub failures: Vec<SeedFailure>,
}

impl GradientResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn numerics(e: AttentionError) -> NumericsError {
    match e {
        AttentionError::Numerics(n) => n,
        other => panic!("configuration was validated before differentiation: {other}"),
    }
}

fn attention_output(variant: Variant, cfg: &AttentionConfig, g: &mut Graph, v: &[Var]) -> Result<Var, AttentionError> {
    let att = match variant {
        Variant::Full => full_attention(g, v[0], v[1], v[2], &AttentionMask::full(cfg.seq_len))?,
        Variant::Block => block_attention(g, v[0], v[1], v[2], cfg)?,
        Variant::Overlap => overlap_block_attention(g, v[0], v[1], v[2], cfg)?,
        Variant::Global => global_block_attention(g, v[0], v[1], v[2], cfg)?,
        Variant::Pooling => unreachable!("pooling is differentiated through its projections"),
    };
    Ok(att.output)
}

struct SeedOutcome {
    max_relative_error: f64,
    per_parameter: BTreeMap<String, f64>,
    failure: Option<SeedFailure>,
}

fn gradient_seed(variant: Variant, seed: u64, index: usize) -> Result<SeedOutcome, NumericsError> {
    let cfg = gradient_config(variant);
    let mut rng = rng_for(seed, &format!("grad-check/{}#{index}", variant.name()));
    let (l, h) = (cfg.seq_len, cfg.head_dim);
    let report = if variant == Variant::Pooling {
        let x = random(&mut rng, l, h);
        let p = PoolingParams::random(h, rng.gen());
        let params: Vec<NamedParam> = ["wq", "wk", "wv", "wo"]
            .iter()
            .zip(p.as_array())
            .map(|(n, t)| NamedParam::new(*n, t.clone()))
            .collect();
        let weights: Vec<f64> = (0..l * h).map(|_| rng.gen_range(0.5..1.5)).collect();
        let f = |g: &mut Graph, v: &[Var]| {
            let xv = g.constant(x.clone());
            let w = PoolingVars {
                wq: v[0],
                wk: v[1],
                wv: v[2],
                wo: v[3],
            };
            pooling_attention_layer(g, xv, w, &cfg)
                .map(|a| a.output)
                .map_err(numerics)
        };
        finite_difference_check_weighted(f, &weights, &params, FD_STEP, FD_TOL)?
    } else {
        let params: Vec<NamedParam> = ["q", "k", "v"]
            .iter()
            .map(|n| NamedParam::new(*n, random(&mut rng, l, h)))
            .collect();
        let weights: Vec<f64> = (0..l * h).map(|_| rng.gen_range(0.5..1.5)).collect();
        let f = |g: &mut Graph, v: &[Var]| attention_output(variant, &cfg, g, v).map_err(numerics);
        finite_difference_check_weighted(f, &weights, &params, FD_STEP, FD_TOL)?
    };
    let failure = report.worst.clone().filter(|_| !report.passed).map(|w| SeedFailure {
        seed_index: index,
        param: w.param,
        element: w.element,
        analytic: w.analytic,
        numeric: w.numeric,
        relative_error: w.relative_error,
    });
    Ok(SeedOutcome {
        max_relative_error: report.max_relative_error,
        per_parameter: report.per_parameter_errors,
        failure,
    })
}

/// Central differences with `h = 1e-6` against the reverse-mode gradient of
/// `Σ w_i · out_i` (random `w_i ∈ [0.5, 1.5)`) for every attention variant,
/// `seeds` random inputs each.
pub fn gradient_suite(seeds: usize, seed: u64) -> Result<Vec<GradientResult>, NumericsError> {
    Variant::ALL
        .iter()
        .map(|&variant| {
            let runs: Vec<SeedOutcome> = (0..seeds)
                .into_par_iter()
                .map(|i| gradient_seed(variant, seed, i))
                .collect::<Result<_, _>>()?;
            let mut per_parameter_max: BTreeMap<String, f64> = BTreeMap::new();
            let mut max_relative_error: f64 = 0.0;
            let mut failures = vec![];
            for run in runs {
                max_relative_error = max_relative_error.max(run.max_relative_error);
                for (k, v) in run.per_parameter {
                    let slot = per_parameter_max.entry(k).or_insert(0.0);
                    *slot = slot.max(v);
                }
                failures.extend(run.failure);
            }
            Ok(GradientResult {
                variant,
                seeds,
                step: FD_STEP,
                tolerance: FD_TOL,
                max_relative_error,
                per_parameter_max,
                failures,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: Variant,
    #[serde(rename = "L")]
    pub seq_len: usize,
    #[serde(rename = "B")]
    pub block_size: usize,
    pub stride: usize,
    /// Score multiply-accumulates counted while running.
    pub flops: u64,
    pub wall_ns: u64,
}

/// Configuration the benchmark uses for `variant` at length `l`.
pub fn bench_config(variant: Variant, l: usize, p: &AttentionParams) -> AttentionConfig {
    let b = p.block_size.clamp(1, l);
    let cfg = AttentionConfig::new(l, b, p.head_dim);
    match variant {
        Variant::Full | Variant::Block => cfg,
        Variant::Overlap => cfg.with_overlap(true),
        Variant::Global => cfg.with_overlap(p.overlap).with_globals(p.n_global.clamp(1, b)),
        Variant::Pooling => cfg.with_pooling(p.pool_kernel, p.pool_stride),
    }
}

/// Lengths `2^k` from `min_len` (rounded up to a power of two) through
/// `max_len`.
pub fn bench_lengths(min_len: usize, max_len: usize) -> Vec<usize> {
    std::iter::successors(Some(min_len.max(1).next_power_of_two()), |l| l.checked_mul(2))
        .take_while(|&l| l <= max_len)
        .collect()
}

/// Runs every variant at every length once, checking the counted score
/// work against [`count_score_flops`].
pub fn bench_sweep(
    p: &AttentionParams,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, AttentionError> {
    let mut rows = vec![];
    for l in bench_lengths(min_len, max_len) {
        for variant in Variant::ALL {
            let cfg = bench_config(variant, l, p);
            if let Err(e) = cfg.validate() {
                log::warn!("skipping {} at L={l}: {e}", variant.name());
                continue;
            }
            let mut rng = rng_for(seed, &format!("bench/{}#{l}", variant.name()));
            let h = cfg.head_dim;
            let (flops, wall_ns) = if variant == Variant::Pooling {
                let x = random(&mut rng, l, h);
                let params = PoolingParams::random(h, rng.gen());
                let start = Instant::now();
                let (_, macs) = run_pooling_layer(&x, &params, &cfg)?;
                (macs, start.elapsed().as_nanos() as u64)
            } else {
                let (q, k, v) = (random(&mut rng, l, h), random(&mut rng, l, h), random(&mut rng, l, h));
                let start = Instant::now();
                let (_, macs) = run_variant(variant, &q, &k, &v, &cfg)?;
                (macs, start.elapsed().as_nanos() as u64)
            };
            let predicted = count_score_flops(variant, &cfg)?;
            if flops != predicted {
                return Err(AttentionError::InvalidConfig(format!(
                    "{} at L={l}: counted {flops} score MACs, closed form says {predicted}",
                    variant.name()
                )));
            }
            log::info!("{} L={l}: {flops} score MACs in {wall_ns} ns", variant.name());
            rows.push(BenchRow {
                variant,
                seq_len: l,
                block_size: cfg.block_size,
                stride: cfg.pool_stride,
                flops,
                wall_ns,
            });
        }
    }
    Ok(rows)
}
