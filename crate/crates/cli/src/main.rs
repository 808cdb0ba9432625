//! `bendflow run <config>` relaxes one experiment; `bendflow verify <trace>`
//! checks a trace for the energy and violation laws.
//!
//! Exit status: 0 success, 1 failed check, 2 runtime or input error.
//! `BENDFLOW_THREADS` sets the worker count (1 runs serially).

mod config;
mod experiments;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bendflow::flow::{check_pair, check_trace, FlowTrace};
use bendflow::Exec;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bendflow", version, about = "Constrained gradient flows for bending rods and plates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a `key = value` config file.
    Run { config: PathBuf },
    /// Check a trace; with a second trace run at half the step size, also
    /// check that the constraint violation halves.
    Verify { trace: PathBuf, half_step: Option<PathBuf> },
}

fn exec_from_env() -> Result<Exec> {
    let Ok(v) = std::env::var("BENDFLOW_THREADS") else {
        return Ok(Exec::Parallel);
    };
    let n: usize = v.trim().parse().with_context(|| format!("BENDFLOW_THREADS must be a positive integer, got '{v}'"))?;
    if n <= 1 {
        return Ok(Exec::Serial);
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    Ok(Exec::Parallel)
}

fn read_trace(path: &Path) -> Result<FlowTrace> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    FlowTrace::read_csv(BufReader::new(f)).with_context(|| format!("reading trace {}", path.display()))
}

fn run(config: &Path) -> Result<bool> {
    let exec = exec_from_env()?;
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = config::Config::parse(&text).with_context(|| format!("in {}", config.display()))?;
    let report = experiments::run(&cfg, exec).with_context(|| format!("running {}", cfg.experiment.name()))?;
    print!("{}", report.summary);
    println!("output = {}", report.output.display());
    if !report.converged {
        log::warn!("stopping criterion not reached within max_steps");
    }
    Ok(true)
}

fn verify(trace: &Path, half: Option<&Path>) -> Result<bool> {
    let t = read_trace(trace)?;
    let mut checks = check_trace(&t);
    if let Some(h) = half {
        checks.push(check_pair(&t, &read_trace(h)?));
    }
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => run(config),
        Command::Verify { trace, half_step } => verify(trace, half_step.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
