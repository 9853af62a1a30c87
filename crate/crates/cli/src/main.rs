use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use longseq_cli::config::{parse_span_lengths, AssemblyMode, Command, ObjectiveKind, RunConfig};
use longseq_core::objectives::SpanLengths;

/// Long-sequence pretraining toolkit: corpus assembly, span corruption and
/// attention verification.
#[derive(Parser, Debug)]
#[command(name = "longseq", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct Io {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Pack documents into fixed-length sequences.
    Assemble {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        seq_len: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<AssemblyMode>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Turn sequences into corruption examples.
    Corrupt {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        seq_len: Option<usize>,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveKind>,
        #[arg(long)]
        mask_ratio: Option<f64>,
        /// `5`, `3,8,32,64` or `geometric:3`.
        #[arg(long, value_parser = parse_span_lengths)]
        span_lengths: Option<SpanLengths>,
        #[arg(long)]
        keep_fraction: Option<f64>,
    },
    /// Per-source document length statistics as JSON.
    Stats {
        #[command(flatten)]
        io: Io,
    },
    /// Compare every attention variant with its oracle on random configurations.
    AttnCheck {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Finite-difference gradient checks for every attention variant.
    GradCheck {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Score-FLOP and wall-time sweep over power-of-two lengths.
    Bench {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        min_len: Option<usize>,
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        block_size: Option<usize>,
        #[arg(long)]
        overlap: bool,
        #[arg(long)]
        n_global: Option<usize>,
        #[arg(long)]
        pool_kernel: Option<usize>,
        #[arg(long)]
        pool_stride: Option<usize>,
        #[arg(long)]
        head_dim: Option<usize>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_io(cfg: &mut RunConfig, io: Io) {
    if io.input.is_some() {
        cfg.input = io.input;
    }
    if io.output.is_some() {
        cfg.output = io.output;
    }
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            RunConfig::from_toml(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.threads, cli.threads);
    match cli.command {
        Cmd::Assemble {
            io,
            seq_len,
            mode,
            clusters,
            top_k,
        } => {
            cfg.command = Command::Assemble;
            set_io(&mut cfg, io);
            set(&mut cfg.seq_len, seq_len);
            set(&mut cfg.assemble.mode, mode);
            set(&mut cfg.assemble.clusters, clusters);
            set(&mut cfg.assemble.top_k, top_k);
        }
        Cmd::Corrupt {
            io,
            seq_len,
            objective,
            mask_ratio,
            span_lengths,
            keep_fraction,
        } => {
            cfg.command = Command::Corrupt;
            set_io(&mut cfg, io);
            set(&mut cfg.seq_len, seq_len);
            set(&mut cfg.corrupt.objective, objective);
            set(&mut cfg.corrupt.mask_ratio, mask_ratio);
            set(&mut cfg.corrupt.span_lengths, span_lengths);
            set(&mut cfg.corrupt.keep_fraction, keep_fraction);
        }
        Cmd::Stats { io } => {
            cfg.command = Command::Stats;
            set_io(&mut cfg, io);
        }
        Cmd::AttnCheck {
            output,
            max_len,
            trials,
        } => {
            cfg.command = Command::AttnCheck;
            set_io(&mut cfg, Io { input: None, output });
            set(&mut cfg.checks.max_len, max_len);
            set(&mut cfg.checks.trials, trials);
        }
        Cmd::GradCheck { output, seeds } => {
            cfg.command = Command::GradCheck;
            set_io(&mut cfg, Io { input: None, output });
            set(&mut cfg.checks.grad_seeds, seeds);
        }
        Cmd::Bench {
            output,
            min_len,
            max_len,
            block_size,
            overlap,
            n_global,
            pool_kernel,
            pool_stride,
            head_dim,
        } => {
            cfg.command = Command::Bench;
            set_io(&mut cfg, Io { input: None, output });
            set(&mut cfg.bench.min_len, min_len);
            set(&mut cfg.bench.max_len, max_len);
            let a = &mut cfg.attention;
            set(&mut a.block_size, block_size);
            a.overlap |= overlap;
            set(&mut a.n_global, n_global);
            set(&mut a.pool_kernel, pool_kernel);
            set(&mut a.pool_stride, pool_stride);
            set(&mut a.head_dim, head_dim);
        }
    }
    Ok(cfg)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LONGSEQ_LOG", "warn")).init();
    let cfg = resolve(Cli::parse())?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    log::debug!("resolved config:\n{}", cfg.to_toml());
    Ok(if longseq_cli::run(&cfg)? {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
