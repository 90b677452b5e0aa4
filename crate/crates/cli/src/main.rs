//! `pdm`: ingest price panels, run partition decoupling, and export reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Params, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "pdm",
    version,
    about = "Partition decoupling of correlation networks"
)]
struct Cli {
    #[command(flatten)]
    params: Params,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean a wide price CSV into return panels and a cleaning report
    Ingest {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose a normalized return panel along a partition vector
    Decompose {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the input panel from a decomposition record
    Reconstruct {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a null-model panel from a decomposition record
    Pdnm {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Decompose the synthetic panel again and print recovery ARI per iteration
        #[arg(long)]
        recover: bool,
    },
    /// Export dominance, embedding, edge and sector-pressure tables
    Report {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `ticker,sector,exchange` CSV
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Panel for sector pressure (defaults to the record's reconstruction)
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Iteration to report on (defaults to the last clustered iteration)
        #[arg(long)]
        iteration: Option<usize>,
    },
    /// Enumerate partition vectors up to `--depth`
    Tree {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Decompose { .. } => "decompose",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Pdnm { .. } => "pdnm",
            Command::Report { .. } => "report",
            Command::Tree { .. } => "tree",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut settings = Settings::resolve(cli.command.name(), &cli.params)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Ingest { prices, out } => {
            settings.add_input("prices", &prices)?;
            commands::ingest(&settings, &prices, &out)
        }
        Command::Decompose { panel, out } => {
            settings.add_input("panel", &panel)?;
            commands::decompose(&settings, &panel, &out)
        }
        Command::Reconstruct { record, out } => {
            settings.add_input("record", &record)?;
            commands::reconstruct(&settings, &record, &out)
        }
        Command::Pdnm {
            record,
            out,
            recover,
        } => {
            settings.add_input("record", &record)?;
            commands::pdnm(&settings, &record, &out, recover)
        }
        Command::Report {
            record,
            out,
            labels,
            panel,
            iteration,
        } => {
            settings.add_input("record", &record)?;
            if let Some(l) = &labels {
                settings.add_input("labels", l)?;
            }
            if let Some(p) = &panel {
                settings.add_input("panel", p)?;
            }
            commands::report(
                &settings,
                &commands::ReportInputs {
                    record,
                    labels,
                    panel,
                    iteration,
                },
                &out,
            )
        }
        Command::Tree { panel, out } => {
            settings.add_input("panel", &panel)?;
            commands::tree(&settings, &panel, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let record = serde_json::json!({
                "status": "error",
                "command": command,
                "message": causes.join(": "),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
