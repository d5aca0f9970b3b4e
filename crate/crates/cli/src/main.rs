use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use eitlab::config::{exit, exit_code, RunConfig};
use eitlab::pipeline::{self, Stage};
use eitlab::Error;

/// Local and interior-surface Dirichlet-to-Neumann experiments for the
/// conductivity equation.
#[derive(Debug, Parser)]
#[command(name = "eitlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and dump the tagged mesh.
    Mesh(RunArgs),
    /// Assemble local and interior-surface DtN maps for the reference and perturbed fields.
    Dtn(RunArgs),
    /// Sample the cross-conductivity kernel and reconstruct the interior-surface gap.
    Skernel(RunArgs),
    /// Run the stability sweep and the propagation-of-smallness fit.
    Experiment(RunArgs),
    /// Everything above, in one run.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `threads`. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &RunArgs) -> Result<RunConfig, (u8, String)> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| (exit::USAGE, format!("cannot read config {}: {e}", args.config.display())))?;
    if text.trim().is_empty() {
        return Err((exit::USAGE, format!("config {} is empty\n\n{}", args.config.display(), Cli::command().render_help())));
    }
    let mut config = RunConfig::from_json(&text).map_err(|e| (exit_code(&e), e.to_string()))?;
    if let Some(dir) = &args.out_dir {
        config.output.dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match &cli.command {
        Command::Mesh(a) => (Stage::Mesh, a),
        Command::Dtn(a) => (Stage::Dtn, a),
        Command::Skernel(a) => (Stage::Skernel, a),
        Command::Experiment(a) => (Stage::Experiment, a),
        Command::Run(a) => (Stage::Run, a),
    };
    let config = match load(args) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(code);
        }
    };
    match pipeline::run(&config, stage) {
        Ok(manifest) => {
            println!(
                "run {} wrote {} files and {} to {}",
                manifest.run_id,
                manifest.files.len(),
                pipeline::MANIFEST,
                config.output.dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = match &e {
                Error::Config { .. } | Error::Geometry { .. } | Error::Conductivity { .. } => e.to_string(),
                _ => format!("run failed: {e}"),
            };
            eprintln!("error: {}", line.replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}
