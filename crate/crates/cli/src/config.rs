//! Run configuration. Every field has a default, so a TOML file only needs
//! the values it changes; command-line flags override the file.

use std::path::PathBuf;

use longseq_core::objectives::SpanLengths;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[default]
    Assemble,
    Corrupt,
    Stats,
    AttnCheck,
    GradCheck,
    Bench,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AssemblyMode {
    #[default]
    Random,
    Linked,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    #[default]
    T5,
    T5Mixed,
    Pegasus,
    ModelBased,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleConfig {
    pub mode: AssemblyMode,
    pub clusters: usize,
    pub top_k: usize,
    pub embed_dim: usize,
    pub kmeans_iters: usize,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            mode: AssemblyMode::Random,
            clusters: 16,
            top_k: 32,
            embed_dim: 256,
            kmeans_iters: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptConfig {
    pub objective: ObjectiveKind,
    /// Masking ratio for T5, target ratio for Pegasus, first-stage ratio for
    /// model-based denoising.
    pub mask_ratio: f64,
    pub span_lengths: SpanLengths,
    pub keep_fraction: f64,
}

impl Default for CorruptConfig {
    fn default() -> Self {
        CorruptConfig {
            objective: ObjectiveKind::T5,
            mask_ratio: 0.15,
            span_lengths: SpanLengths::default(),
            keep_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionParams {
    pub block_size: usize,
    pub overlap: bool,
    pub n_global: usize,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    pub head_dim: usize,
}

impl Default for AttentionParams {
    fn default() -> Self {
        AttentionParams {
            block_size: 64,
            overlap: false,
            n_global: 1,
            pool_kernel: 4,
            pool_stride: 4,
            head_dim: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Largest sequence length drawn by the equivalence suite.
    pub max_len: usize,
    /// Random configurations per variant.
    pub trials: usize,
    /// Seeds per variant in the gradient suite.
    pub grad_seeds: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_len: 64,
            trials: 200,
            grad_seeds: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            min_len: 64,
            max_len: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub seq_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub assemble: AssembleConfig,
    pub corrupt: CorruptConfig,
    pub attention: AttentionParams,
    pub checks: CheckConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::default(),
            seed: 0,
            threads: 0,
            seq_len: 2048,
            input: None,
            output: None,
            assemble: AssembleConfig::default(),
            corrupt: CorruptConfig::default(),
            attention: AttentionParams::default(),
            checks: CheckConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses `5`, `3,8,32,64` or `geometric:3.5`.
pub fn parse_span_lengths(s: &str) -> Result<SpanLengths, String> {
    let s = s.trim();
    let sampler = if let Some(mean) = s.strip_prefix("geometric:") {
        let mean: f64 = mean
            .trim()
            .parse()
            .map_err(|e| format!("bad geometric mean `{mean}`: {e}"))?;
        SpanLengths::Geometric { mean }
    } else if s.contains(',') {
        let lengths = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| format!("bad span length `{p}`: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        SpanLengths::UniformSet { lengths }
    } else {
        let length: usize = s.parse().map_err(|e| format!("bad span length `{s}`: {e}"))?;
        SpanLengths::Fixed { length }
    };
    sampler.validate().map_err(|e| e.to_string())?;
    Ok(sampler)
}
