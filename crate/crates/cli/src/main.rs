//! `lipleak`: validate a clip manifest, expand the setup grid, drive the
//! generator/extractor adapters, score the outputs and render reports.
//!
//! Exit status: 0 success, 1 domain failure (invalid clip, failed job,
//! missing cells), 2 environment failure (I/O, bad flags or config).

mod args;
mod commands;
mod generate;
mod layout;
mod metrics;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lipleak", version, about = "Lip-leakage evaluation harness for talking-face generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every clip of a manifest and print one report line per clip.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Expand methods × clips × setups × references into a job manifest.
    Grid(GridArgs),
    /// Run generator and extractor adapters over the job manifest.
    Generate(GenerateArgs),
    /// Score generated clips into the record store.
    Metrics(MetricsArgs),
    /// Aggregate the record store into tables and the leakage summary.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct GridArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "lipleak-out")]
    pub output_dir: PathBuf,
    /// Seed of the mismatched-audio pairing.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Generator adapter as `name=command-template`; one per method.
    #[arg(long = "adapter", required = true)]
    pub adapters: Vec<String>,
    /// Alternative reference strategy as `method=strategy` (default first_frame).
    #[arg(long = "ar-detail")]
    pub ar_details: Vec<String>,
    /// `zero` or `noise:AMPLITUDE[:SEED]`.
    #[arg(long, default_value = "zero")]
    pub silence: String,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "lipleak-out")]
    pub output_dir: PathBuf,
    /// Override a generator template recorded by `grid`, as `name=command-template`.
    #[arg(long = "adapter")]
    pub adapters: Vec<String>,
    /// Feature extractor command template.
    #[arg(long)]
    pub extractor: String,
    /// Artifact kinds the extractor writes (comma separated).
    #[arg(long, default_value = "visual_sync,audio_sync,identity,distribution,landmarks")]
    pub extractor_produces: String,
    /// Per-process timeout in seconds.
    #[arg(long, default_value_t = 3600)]
    pub timeout: u64,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
}

#[derive(Args)]
pub struct MetricsArgs {
    #[arg(long, default_value = "lipleak-out")]
    pub output_dir: PathBuf,
    /// Comma-separated subset of lse,ssim,psnr,fid,csim,csim_ref,lmd.
    #[arg(long, default_value = "lse,ssim,psnr,fid,csim,lmd")]
    pub metrics: String,
    #[arg(long, default_value_t = lipleak::DEFAULT_MAX_OFFSET)]
    pub max_offset: usize,
    /// Frame region for SSIM/PSNR: `full` or `lower-half`.
    #[arg(long, default_value = "full")]
    pub region_mask: String,
    /// Divide LMD by the ground-truth inter-ocular distance.
    #[arg(long)]
    pub lmd_normalize: bool,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "lipleak-out")]
    pub output_dir: PathBuf,
    /// Record store to read instead of `<output-dir>/records.jsonl`.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Format printed to stdout: csv, json or table. All three are written to disk.
    #[arg(long, default_value = "table")]
    pub format: String,
}

/// A failure and the exit code it maps to.
pub enum Failure {
    Domain(anyhow::Error),
    Env(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Env(_) => 2,
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn env<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Env(e.into())
}

pub fn domain<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Domain(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { manifest } => commands::validate(&manifest),
        Command::Grid(a) => commands::grid(&a),
        Command::Generate(a) => generate::run(&a),
        Command::Metrics(a) => metrics::run(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Domain(e) | Failure::Env(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
