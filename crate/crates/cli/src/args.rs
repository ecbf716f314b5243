use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "xfam", version, about = "Cross-family speculative prefill prompt compression")]
pub struct Cli {
    #[command(flatten)]
    pub settings: Settings,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Settings {
    /// TOML profile file (overridden by XFAM_CONFIG).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "default")]
    pub profile: String,
    /// Fraction of target tokens to keep.
    #[arg(long, global = true, conflicts_with = "target_length")]
    pub keep_rate: Option<f64>,
    /// Compressed length in target tokens, aligned to --block-align.
    #[arg(long, global = true)]
    pub target_length: Option<usize>,
    /// Block size for target-length alignment; 0 disables alignment.
    #[arg(long, global = true)]
    pub block_align: Option<usize>,
    #[arg(long, global = true)]
    pub chunk_size: Option<usize>,
    /// Odd pooling kernel width.
    #[arg(long, global = true)]
    pub kernel: Option<usize>,
    /// Lookahead steps requested from the provider.
    #[arg(long, global = true)]
    pub lookahead: Option<usize>,
    #[arg(long, global = true)]
    pub delimiter: Option<String>,
    /// synthetic, file:PATH or http:URL.
    #[arg(long, global = true, default_value = "synthetic")]
    pub provider: String,
    /// Model id sent to an HTTP attention provider.
    #[arg(long, global = true)]
    pub draft_model: Option<String>,
    /// whitespace, bytes[:N] or a tokenizer.json path.
    #[arg(long, global = true, default_value = "whitespace")]
    pub draft_tokenizer: String,
    #[arg(long, global = true, default_value = "bytes:3")]
    pub target_tokenizer: String,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    pub out: OutFormat,
    /// Seed for the synthetic provider.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress one prompt, or every line of a JSONL corpus with --jsonl.
    Compress {
        /// Input file; stdin when absent or `-`.
        input: Option<PathBuf>,
        #[arg(long)]
        jsonl: bool,
        /// Write the result here instead of stdout.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Compress a JSONL corpus at several keep rates and report per-sample
    /// and aggregate statistics.
    Sweep {
        /// JSONL corpus; stdin when `-`.
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', conflicts_with = "target_length")]
        keep_rates: Vec<f64>,
        #[arg(long)]
        csv_out: Option<PathBuf>,
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus as JSONL.
    Corpus {
        #[arg(long, value_enum, default_value_t = CorpusKind::Needle)]
        kind: CorpusKind,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Minimum words per sample (functions for code).
        #[arg(long, default_value_t = 1000)]
        min_len: usize,
        /// Maximum words per sample, exclusive.
        #[arg(long, default_value_t = 4000)]
        max_len: usize,
    },
    /// Serve POST /v1/compress.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Largest accepted request body in bytes.
        #[arg(long, default_value_t = 8 << 20)]
        max_input_bytes: usize,
        /// Completion endpoint for POST /v1/completions passthrough.
        #[arg(long)]
        upstream: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusKind {
    Needle,
    Text,
    Code,
}
