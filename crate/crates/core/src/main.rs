use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mglab::harness::{self, selftest, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mglab", version, about = "Online learning in two-player uninformed Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: one run log per seed plus summary.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replace the configured seed list with 1..=N.
        #[arg(long)]
        seeds: Option<u64>,
        /// Overwrite existing results in the output directory.
        #[arg(long)]
        force: bool,
    },
    /// Re-evaluate the run logs in a directory; one CSV row per run.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check invariants on a built-in tiny game.
    Selftest,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> mglab::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seeds,
            force,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(n) = seeds {
                if n == 0 {
                    return Err(mglab::Error::Precondition("--seeds must be at least 1".into()));
                }
                cfg.seeds = (1..=n).collect();
            }
            let res = harness::simulate(&cfg, &out, force)?;
            println!("wrote {} run logs and {}", res.runs.len(), res.summary.display());
        }
        Command::Evaluate { run, out } => {
            let n = harness::evaluate_dir(&run, &out)?;
            println!("evaluated {n} runs into {}", out.display());
        }
        Command::Selftest => {
            let checks = selftest::run_selftest()?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} {}", c.name, c.detail);
            }
            if failed > 0 {
                println!("{failed} of {} checks failed", checks.len());
                return Ok(ExitCode::FAILURE);
            }
            println!("all {} checks passed", checks.len());
        }
    }
    Ok(ExitCode::SUCCESS)
}
