//! Command-line driver: every stage reads the previous stage's artifacts
//! from the output directory and writes its own.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use citegen_core::provenance::Provenance;
use citegen_core::{Error, ErrorClass, Exec, Result};

use artifacts::Layout;
use config::LoadedConfig;

#[derive(Debug, Parser)]
#[command(name = "citegen", version, about = "Citation text generation experiments")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(short = 'c', long = "run-config", global = true, default_value = "citegen.toml")]
    pub run_config: PathBuf,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean the raw corpus into instances and the example-sentence pool.
    Ingest,
    /// Pick an example sentence for every single-citation instance.
    Pool,
    /// Generate free-form intents, assign categorical ones, audit leakage.
    Intents,
    /// Render prompts for the run matrix.
    Render {
        /// Render one configuration string only.
        #[arg(long = "config", requires = "instance")]
        config: Option<String>,
        /// Instance to render with --config.
        #[arg(long, requires = "config")]
        instance: Option<String>,
    },
    /// Generate outputs for every rendered prompt.
    Run {
        /// Backend id; repeat for several. Defaults to all configured backends.
        #[arg(long = "backend")]
        backends: Vec<String>,
    },
    /// Measure generations (and baselines) with every available metric.
    Score,
    /// Tables and tests over the measurements.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Human evaluation study: facts, blinded tasks, coverage.
    #[command(subcommand)]
    Humeval(HumevalCmd),
    /// Serve the annotation API for the human evaluation study.
    HumevalServe {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Rebuild every table from the current artifacts.
    Report,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Mean of every metric per configuration.
    Aggregate {
        /// Restrict to instances present in every row instead of failing.
        #[arg(long)]
        mask: bool,
    },
    /// Pearson matrices per backend and pooled.
    Correlations,
    /// Paired bootstrap of configuration A against B.
    Significance {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Metric to test; all when absent.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Long-prompt A against short-prompt B.
    LengthBin {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Token count or "mean".
        #[arg(long, default_value = "mean")]
        threshold: String,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Best configuration per (backend, template, metric).
    Census,
}

#[derive(Debug, Subcommand)]
pub enum HumevalCmd {
    /// Sample instances, extract facts, create the study directory.
    Prepare {
        /// Annotator id; repeat for several. Tokens are printed once.
        #[arg(long = "annotator", required = true)]
        annotators: Vec<String>,
    },
    /// Assemble blinded tasks from curated facts and generations.
    BuildTasks,
    /// Coverage per configuration and its correlation with the metrics.
    Coverage {
        /// Accept tasks that have no judgment yet.
        #[arg(long)]
        partial: bool,
    },
    /// Measure paragraphs written in the composition study.
    MeasureHuman,
}

/// Shared state of one invocation.
pub struct Ctx {
    pub cfg: LoadedConfig,
    pub layout: Layout,
    pub exec: Exec,
}

impl Ctx {
    pub fn prov(&self) -> &Provenance {
        &self.cfg.provenance
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = LoadedConfig::load(&cli.run_config)?;
    let layout = Layout::new(cfg.output_dir());
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let ctx = Ctx { cfg, layout, exec };
    if !matches!(cli.command, Command::HumevalServe { .. }) {
        artifacts::save(&ctx.layout.config(), ctx.prov(), &ctx.cfg.file)?;
    }
    use commands::*;
    match cli.command {
        Command::Ingest => corpus::ingest(&ctx),
        Command::Pool => corpus::pool(&ctx),
        Command::Intents => intents::intents(&ctx),
        Command::Render { config, instance } => render::render(&ctx, config.as_deref(), instance.as_deref()),
        Command::Run { backends } => run::run(&ctx, &backends),
        Command::Score => score::score(&ctx),
        Command::Analyze(cmd) => analyze::analyze(&ctx, cmd),
        Command::Humeval(cmd) => humeval::humeval(&ctx, cmd),
        Command::HumevalServe { addr } => humeval::serve(&ctx, addr),
        Command::Report => report::report(&ctx),
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Upstream => 3,
        ErrorClass::Incomplete => 4,
        ErrorClass::Io => 1,
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
