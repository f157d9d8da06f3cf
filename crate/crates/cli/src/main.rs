use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hosim_cli::{
    cmd_oracle, cmd_report, cmd_run, cmd_sweep, parse_seeds, render_report, write_csv, CliError, FlowSource,
};
use hosim_core::evaluation::OracleMode;

#[derive(Parser)]
#[command(name = "hosim", version, about = "Handover-region self-organization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleModeArg {
    Exhaustive,
    Bnb,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics.csv, summary.json and flow.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one scenario over many seeds.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `a..b` (inclusive) or a comma list.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Minimum-cut partition of a flow matrix under a per-region capacity.
    Oracle {
        /// A `source,target,count` CSV file.
        #[arg(long, conflicts_with = "run", required_unless_present = "run")]
        flow: Option<PathBuf>,
        /// A finished run directory.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        regions: usize,
        #[arg(long)]
        capacity: usize,
        #[arg(long, value_enum, default_value = "bnb")]
        mode: OracleModeArg,
        /// Directory for partition.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finished runs.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write the table as CSV to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, out, seed } => {
            let report = cmd_run(&scenario, &out, seed)?;
            println!("{}", report.one_line());
        }
        Command::Sweep {
            scenario,
            out,
            seeds,
            parallel,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let agg = cmd_sweep(&scenario, &seeds, &out, parallel)?;
            if let Some(r) = agg.final_ratio {
                println!(
                    "{} seeds: final ratio {:.4} ± {:.4}, {} converged",
                    r.n, r.mean, r.stddev, agg.n_converged
                );
            }
        }
        Command::Oracle {
            flow,
            run,
            regions,
            capacity,
            mode,
            out,
        } => {
            let source = match (flow, run) {
                (Some(f), _) => FlowSource::Csv(f),
                (None, Some(r)) => FlowSource::RunDir(r),
                (None, None) => unreachable!("clap requires one source"),
            };
            let mode = match mode {
                OracleModeArg::Exhaustive => OracleMode::Exhaustive,
                OracleModeArg::Bnb => OracleMode::BranchAndBound,
            };
            let result = cmd_oracle(&source, regions, capacity, mode, out.as_deref())?;
            println!("{}", result.describe());
        }
        Command::Report { runs, out } => {
            let dirs: Vec<&Path> = runs.iter().map(PathBuf::as_path).collect();
            let rows = cmd_report(&dirs)?;
            let (table, csv) = render_report(&rows);
            print!("{table}");
            if let Some(path) = out {
                write_csv(&path, &csv)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hosim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
