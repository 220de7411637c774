mod audit;
mod batch;
mod error;
mod files;
mod generate;
mod policy;
mod report;
mod run;

use clap::{Parser, Subcommand};

/// Non-clairvoyant scheduling experiments with certified lower bounds.
///
/// Exit codes: 0 success, 2 usage, 3 incompatible inputs, 4 empty input,
/// 5 audit failure.
#[derive(Debug, Parser)]
#[command(name = "fairsched", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random or star instance and print its content hash.
    Generate(generate::GenerateCmd),
    /// Simulate one policy; write trace, completions and objective files.
    Run(run::RunCmd),
    /// Replay a run and execute the selected audits.
    Audit(audit::AuditCmd),
    /// Generate and evaluate many instances in parallel.
    Batch(batch::BatchCmd),
    /// Aggregate a batch into summary and adversary-curve CSVs.
    Report(report::ReportCmd),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => generate::run(c),
        Command::Run(c) => run::run(c),
        Command::Audit(c) => audit::run(c),
        Command::Batch(c) => batch::run(c),
        Command::Report(c) => report::run(c),
    };
    if let Err(e) = result {
        eprintln!("fairsched: {e}");
        std::process::exit(e.exit_code());
    }
}
