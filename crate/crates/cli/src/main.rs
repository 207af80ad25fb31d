//! `rstkit`: command-line entry point for every pipeline stage.
//!
//! Exit codes: 0 success, 1 user error (bad flags, unreadable or invalid
//! input), 2 internal error. Errors are printed as one `error: ...` line.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rstkit", version, about = "RST treebank toolkit: conversion, preprocessing, segmentation, parsing, evaluation")]
pub struct Cli {
    /// Directory against which relative input paths are resolved when they
    /// do not exist in the working directory.
    #[arg(long, global = true, env = "RSTKIT_DATA_DIR", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert a directory of .rs3 files to a canonical JSONL file (or back with --to rs3).
    Convert(ConvertArgs),
    /// Split forests, remap relations, drop single-EDU trees.
    Preprocess(PreprocessArgs),
    /// Corpus statistics and spanned-sentence coverage.
    Stats(StatsArgs),
    /// Predict EDU boundaries with a trained segmenter.
    Segment(SegmentArgs),
    /// Train the CRF boundary segmenter.
    TrainSegmenter(TrainArgs),
    /// Build trees over the EDUs of each document.
    Parse(ParseArgs),
    /// Parseval (S/N/R/Full) and segmentation scores.
    Eval(EvalArgs),
    /// Replay a loss log through windowed dynamic weight averaging.
    DwaSim(DwaArgs),
    /// Print the built-in RRT relation remapping table.
    DumpRemap,
}

#[derive(Args, Debug, Clone)]
pub struct MetaArgs {
    /// Language tag for documents read from .rs3 files.
    #[arg(long, value_enum, default_value_t = Lang::En)]
    pub lang: Lang,
    /// TSV of `doc_id<TAB>train|dev|test`; unlisted documents are train.
    #[arg(long = "splits", value_name = "PATH")]
    pub split_file: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lang {
    En,
    Ru,
    Other,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Canonical,
    Rs3,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Input: .rs3 directory (or canonical file with --to rs3).
    pub input: PathBuf,
    /// Output: canonical file, `-` for stdout (or directory with --to rs3).
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Canonical)]
    pub to: Format,
    #[command(flatten)]
    pub meta: MetaArgs,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Input: .rs3 directory or canonical file.
    pub input: PathBuf,
    /// Output canonical file, `-` for stdout.
    pub output: PathBuf,
    /// Remapping table file, or `rrt` for the built-in table.
    #[arg(long, value_name = "PATH|rrt")]
    pub remap: Option<String>,
    /// Emit each connected component of an .rs3 forest as its own document.
    #[arg(long)]
    pub split_forests: bool,
    /// Drop documents whose tree has a single EDU.
    #[arg(long)]
    pub drop_single_edu: bool,
    #[command(flatten)]
    pub meta: MetaArgs,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Input: .rs3 directory or canonical file.
    pub input: PathBuf,
    /// Sentence starts: `doc_id<TAB>t0 t1 ...` (token indices).
    #[arg(long, value_name = "PATH")]
    pub sents: Option<PathBuf>,
    /// Add one row per genre.
    #[arg(long)]
    pub by_genre: bool,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub meta: MetaArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FilterArgs {
    /// Keep only these genres (repeatable).
    #[arg(long = "genre", value_name = "GENRE")]
    pub genres: Vec<String>,
    /// Keep only these splits (repeatable).
    #[arg(long = "split", value_enum, value_name = "SPLIT")]
    pub splits: Vec<SplitArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Model written by train-segmenter.
    pub model: PathBuf,
    /// Canonical input file.
    pub input: PathBuf,
    /// Canonical output file (default stdout).
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Canonical training file.
    pub input: PathBuf,
    /// Where to write the model.
    pub model: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    /// log2 of the number of hashed feature buckets.
    #[arg(long, default_value_t = 16)]
    pub bits: u32,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Seed for per-epoch shuffling.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    /// Canonical input file; EDUs must be present.
    pub input: PathBuf,
    /// Canonical output file (default stdout).
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
    /// JSONL score file from an external scorer.
    #[arg(long, value_name = "PATH", group = "provider")]
    pub scores: Option<PathBuf>,
    /// Right-branching trees labeled with --label.
    #[arg(long, group = "provider")]
    pub baseline: bool,
    /// Scores derived from the input's own trees.
    #[arg(long, group = "provider")]
    pub oracle: bool,
    /// Label used by --baseline.
    #[arg(long, default_value = "elaboration_NS", requires = "baseline")]
    pub label: String,
    /// Beam width; greedy decoding when absent.
    #[arg(long, value_name = "W")]
    pub beam: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Gold canonical file.
    pub gold: PathBuf,
    /// Predicted canonical file.
    pub pred: PathBuf,
    /// Score predicted segmentation too; EDUs may differ from gold.
    #[arg(long)]
    pub end_to_end: bool,
    /// Add one group per genre.
    #[arg(long)]
    pub by_genre: bool,
    /// Metrics to report.
    #[arg(long, value_delimiter = ',', default_values = ["S", "N", "R", "Full"])]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Args, Debug)]
pub struct DwaArgs {
    /// CSV of per-step task losses, one column per task; an optional
    /// non-numeric header row names the tasks.
    pub losses: PathBuf,
    /// Window length b.
    #[arg(long, default_value_t = rstkit::dwa::DEFAULT_WINDOW)]
    pub b: usize,
    /// Softmax temperature.
    #[arg(long, default_value_t = rstkit::dwa::DEFAULT_TEMPERATURE)]
    pub temp: f64,
    /// Expected number of tasks; checked against the CSV.
    #[arg(long)]
    pub k: Option<usize>,
    /// Output CSV (default stdout).
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        let msg = info.to_string().replace('\n', " ");
        eprintln!("error: internal: {msg}");
    }));
    std::panic::catch_unwind(real_main).unwrap_or(ExitCode::from(2))
}

fn real_main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            // clap's multi-line message folded onto one line, usage hints dropped
            let text = e.to_string();
            let parts: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", parts.join(" "));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
