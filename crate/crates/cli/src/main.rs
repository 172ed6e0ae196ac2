//! Configuration-driven entry point: load a spec file, run the requested
//! check or construction, and emit JSON reports and trajectory data.
//!
//! Exit codes: 0 when the run passed, 1 when a check ran and failed, 2 on
//! input or schema errors.

mod commands;
mod parallel;
mod specfile;

use clap::{Parser, Subcommand};
use commands::Outcome;
use specfile::SpecFile;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sgk", version, about = "Small-gain certification toolkit")]
struct Cli {
    /// JSON spec file describing the scenario or network to work on.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Directory for report.json and trajectory data.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed from the spec file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sampled checks (default: SGK_WORKERS, then the
    /// logical core count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Suppress stdout; files still go to --out.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the cyclic small-gain condition of a gain network.
    CheckSmallgain,
    /// Run the certificate check the spec asks for.
    Certify,
    /// Compose subsystem estimates into a network certificate.
    Compose,
    /// Decompose a certificate into subsystem gains.
    Decompose,
    /// Simulate a scenario and export its trajectory.
    Simulate,
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let path = cli
        .spec
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("missing --spec PATH"))?;
    let mut spec = SpecFile::load(path)?;
    if let Some(seed) = cli.seed {
        spec.params.seed = seed;
    }
    let workers = parallel::worker_count(cli.workers);

    let (outcome, files) = match cli.command {
        Command::CheckSmallgain => (commands::check_smallgain(&spec)?, None),
        Command::Certify => (commands::certify(&spec, workers)?, None),
        Command::Compose => (commands::compose(&spec, workers)?, None),
        Command::Decompose => (commands::decompose(&spec, workers)?, None),
        Command::Simulate => {
            let (outcome, files) = commands::simulate(&spec)?;
            (outcome, Some(files))
        }
    };

    let rendered = serde_json::to_string_pretty(&outcome.report)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), format!("{rendered}\n"))?;
        if let Some(files) = &files {
            std::fs::write(dir.join("trajectory.csv"), &files.csv)?;
            std::fs::write(dir.join("plot.gp"), &files.plot_hint)?;
        }
    }
    if !cli.quiet {
        use std::io::Write;
        // Tolerate a closed pipe on the consumer side.
        let _ = writeln!(std::io::stdout(), "{rendered}");
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if outcome.verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
