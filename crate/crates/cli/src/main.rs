//! `fclt`: exact diffusion coefficients, replicate sweeps and the operator property suite.
//!
//! Exit codes: 0 pass, 1 usage or configuration error, 2 contract violation.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{FileConfig, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "fclt", version, about = "Diffusion coefficients and FCLT checks for finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact sigma^2 by both formulas, resolvent tables and TV convergence.
    Exact(RunArgs),
    /// Replicate sweep of I_n = Lambda_n + A_n over the n list.
    Simulate(RunArgs),
    /// Randomized operator property suite.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config with flat keys; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// two-state, birth-death(m), random-reversible(m, seed), cycle(m) or a model file.
    #[arg(long, value_name = "NAME|PATH")]
    model: Option<String>,
    /// parity, first-coordinate or a JSON file.
    #[arg(long = "f", value_name = "NAME|PATH")]
    f: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated scalings, e.g. 100,1000,10000.
    #[arg(long = "n", value_name = "LIST", value_delimiter = ',')]
    n: Option<Vec<u64>>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replaces every contract tolerance of the command.
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Schedule exponent p in lambda_n = c n^{-p}.
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long = "c")]
    c: Option<f64>,
    #[arg(long)]
    t_points: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    suite_models: Option<usize>,
    #[arg(long)]
    suite_triples: Option<usize>,
    #[arg(long)]
    suite_min_m: Option<usize>,
    #[arg(long)]
    suite_max_m: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            model: self.model,
            f: self.f,
            seed: self.seed,
            replicates: self.replicates,
            n: self.n,
            out: self.out,
            tol: self.tol,
            exponent: self.exponent,
            c: self.c,
            t_points: self.t_points,
            horizon: self.horizon,
            suite_models: self.suite_models,
            suite_triples: self.suite_triples,
            suite_min_m: self.suite_min_m,
            suite_max_m: self.suite_max_m,
        };
        RunConfig::resolve(base.overlay(flags))
    }
}

type CommandFn = fn(&RunConfig) -> Result<commands::Outcome, CliError>;

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, args, command): (&str, RunArgs, CommandFn) = match cli.command {
        Command::Exact(a) => ("exact", a, commands::cmd_exact),
        Command::Simulate(a) => ("simulate", a, commands::cmd_simulate),
        Command::Verify(a) => ("verify", a, commands::cmd_verify),
    };
    let cfg = args.resolve()?;
    let outcome = command(&cfg)?;
    output::write_outputs(&cfg.out, name, &cfg, &outcome.report, &outcome.csv)?;

    print!("{}", commands::render_checks(&outcome.checks));
    let violations = outcome.violations();
    for v in &violations {
        eprintln!("contract violated: {} (worst {:e}, tolerance {:e})", v.name, v.worst, v.tolerance);
    }
    println!(
        "{name}: {} -> {}",
        if violations.is_empty() { "pass" } else { "fail" },
        cfg.out.display()
    );
    Ok(violations.is_empty())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
