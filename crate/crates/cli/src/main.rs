//! Command-line runner: loads a scenario file, simulates the selected
//! strategies, writes the report bundle, and optionally checks the
//! simulated ledgers against the closed-form cost model.
//!
//! Exit codes: 0 on success, 1 on load/run/write errors, 2 on a
//! model-vs-simulation mismatch under `--compare` (and on usage errors),
//! so CI pipelines can gate on any nonzero status.

use clap::{Parser, ValueEnum};
use nmsim_core::{
    compare_model_vs_sim, emit_report, load_scenario, rat_to_f64, ReportFormat, RunOutput,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

/// Deterministic simulator for centralized, flat-bed mobile-agent, and
/// hybrid store-backed network management, with exact cost accounting.
#[derive(Parser, Debug)]
#[command(name = "nmsim", version, about)]
struct Cli {
    /// Scenario file to run.
    scenario: PathBuf,

    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the scenario's round count.
    #[arg(long)]
    rounds: Option<u32>,

    /// Directory the report bundle is written into.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Latency-table format; the ledger and cost files are always CSV.
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,

    /// Check the ledgers against the closed-form model and exit
    /// nonzero on any mismatch.
    #[arg(long)]
    compare: bool,
}

fn print_summary(output: &RunOutput) {
    println!("rounds: {}", output.rounds);
    for table in &output.tables {
        println!(
            "{:>8}: mean latency {:.3} ms",
            table.strategy.to_string(),
            rat_to_f64(table.mean_latency())
        );
    }
    for (kind, ledger) in &output.ledgers {
        println!(
            "{:>8}: total traffic {:.0} cost units over {} messages",
            kind.to_string(),
            rat_to_f64(ledger.grand_total()),
            ledger.records().len()
        );
    }
}

fn run(cli: &Cli) -> Result<bool, Box<dyn std::error::Error>> {
    let mut scenario = load_scenario(&cli.scenario)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(rounds) = cli.rounds {
        scenario.rounds = rounds;
    }

    let output = nmsim_core::run_scenario(&scenario)?;
    print_summary(&output);

    let (record, mismatched) = match compare_model_vs_sim(&output) {
        Ok(record) => (record, false),
        Err(err) => {
            eprintln!("{err}");
            (*err.record, true)
        }
    };

    let written = emit_report(&output, &record, &cli.out, cli.format.into())?;
    for path in &written {
        println!("wrote {}", path.display());
    }

    if cli.compare {
        print!("{}", record.render());
        Ok(!mismatched)
    } else {
        Ok(true)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
