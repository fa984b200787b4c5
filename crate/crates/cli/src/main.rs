mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Command, Format, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "quasiloc", version, about = "Localization diagnostics for the interacting quasi-periodic chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write results here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// JSON run configuration whose entries override the flags, or an earlier CSV output to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "QUASILOC_THREADS")]
    threads: Option<usize>,
}

enum Failure {
    Validation(String),
    Runtime(anyhow::Error),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let format = cli.format.unwrap_or_else(|| cli.command.default_format());
    let mut config =
        RunConfig { command: cli.command, output: cli.output, format, threads: cli.threads, deterministic: true };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let parsed = match text.lines().next() {
            // a previous CSV output replays its recorded run, keeping the new destination
            Some(first) if first.starts_with("# config: ") => RunConfig::from_header(first)
                .map(|c| RunConfig { output: config.output.clone(), format: config.format, ..c }),
            _ => config.with_overrides(&text),
        };
        config = parsed.map_err(|e| Failure::Validation(format!("{e:#}")))?;
    }
    commands::validate(&config.command).map_err(Failure::Validation)?;
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Failure::Validation("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Runtime(e.into()))?;
    }
    let out = commands::execute(&config.command).map_err(Failure::Runtime)?;
    output::emit(&config, &out).map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("invalid input: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
