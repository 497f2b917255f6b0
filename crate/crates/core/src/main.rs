use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epdiff_blowup::cli::{self, RunConfig, SweepConfig};
use epdiff_blowup::error::{Error, Result};
use epdiff_blowup::solver::Termination;
use epdiff_blowup::verify::Suite;

/// Radial EPDiff blowup laboratory.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one (n, k) run and write CSV/JSON/SVG artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample the Ψ conditions and report C_est.
    CheckCriteria {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Run identity/oracle suites: hypergeom, kernels, radialops, all.
    Verify {
        #[arg(long)]
        suite: Suite,
    },
    /// Simulate every pair of a sweep config; writes sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn output_override() -> Option<PathBuf> {
    std::env::var_os("OUTPUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Simulate { config } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = output_override() {
                cfg.output_dir = dir;
            }
            let summary = cli::cmd_simulate(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?);
            if let Termination::StepUnderflow { time, reason } = &summary.termination {
                eprintln!("error: step underflow at t = {time}: {reason}");
            }
            Ok(summary.exit_code())
        }
        Command::CheckCriteria { n, k, samples } => {
            let report = cli::cmd_check_criteria(n, k, samples)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?);
            Ok(if report.passed { 0 } else { 3 })
        }
        Command::Verify { suite } => {
            let rows = cli::cmd_verify(suite)?;
            print!("{}", cli::format_verify_table(&rows));
            Ok(if rows.iter().all(|r| r.passed) { 0 } else { 3 })
        }
        Command::Sweep { config } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(dir) = output_override() {
                cfg.template.output_dir = dir;
            }
            let rows = cli::cmd_sweep(&cfg)?;
            for r in &rows {
                println!("({}, {}): {}", r.n, r.k, r.status);
            }
            Ok(rows.iter().map(|r| r.exit_code).max().unwrap_or(0))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = run(args.command).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
