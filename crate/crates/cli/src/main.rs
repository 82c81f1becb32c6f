use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sattrace_cli::config::{Mode, RunConfig};
use sattrace_cli::error::CliError;
use sattrace_cli::pipeline;

/// Synthesize verified SAT reasoning traces with controlled conflict
/// injection, derive matched monotonic control corpora, and measure
/// self-correction behavior in model responses.
#[derive(Parser)]
#[command(name = "sattrace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Witness,
    Search,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; defaults apply for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate satisfiable DIMACS instances and a manifest.
    Generate(CommonArgs),
    /// Synthesize traces, verify final assignments, and filter the golden
    /// corpus.
    Synthesize {
        #[command(flatten)]
        common: CommonArgs,
        /// Engine mode override.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Per-instance injection probability override.
        #[arg(long, value_name = "REAL")]
        injection_prob: Option<f64>,
    },
    /// Build matched treatment/control dataset files from the golden
    /// corpus.
    Export(CommonArgs),
    /// Score a responses file against its instances.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Line-delimited response records ({"id", "response"};
        /// "completion"/"trace" accepted as aliases).
        #[arg(long)]
        responses: PathBuf,
        /// Instances directory containing manifest.jsonl; defaults to
        /// <out>/instances.
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Require every response to parse under the strict trace grammar.
        #[arg(long)]
        strict: bool,
        /// Tolerate arbitrary text (default).
        #[arg(long, conflicts_with = "strict")]
        lenient: bool,
    },
    /// Summarize exported dataset files.
    Stats(CommonArgs),
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(common) => {
            let config = common.resolve()?;
            let summary = pipeline::generate(&config)?;
            print!("{}", summary.report.render());
        }
        Command::Synthesize {
            common,
            mode,
            injection_prob,
        } => {
            let mut config = common.resolve()?;
            if let Some(mode) = mode {
                config.injection.mode = match mode {
                    ModeArg::Witness => Mode::Witness,
                    ModeArg::Search => Mode::Search,
                };
            }
            if let Some(p) = injection_prob {
                config.injection.probability = p;
            }
            let summary = pipeline::synthesize(&config)?;
            print!("{}", summary.report.render());
        }
        Command::Export(common) => {
            let config = common.resolve()?;
            let summary = pipeline::export(&config)?;
            print!("{}", summary.report.render());
        }
        Command::Analyze {
            common,
            responses,
            instances,
            strict,
            lenient: _,
        } => {
            let config = common.resolve()?;
            let args = pipeline::AnalyzeArgs {
                responses,
                instances_dir: instances
                    .unwrap_or_else(|| pipeline::Layout::new(&config.out_dir).instances_dir()),
                out_dir: config.out_dir.clone(),
                strict,
            };
            let summary = pipeline::analyze(&args)?;
            print!("{}", summary.report.render());
        }
        Command::Stats(common) => {
            let config = common.resolve()?;
            let summary = pipeline::stats(&config.out_dir)?;
            print!("{}", summary.report.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
