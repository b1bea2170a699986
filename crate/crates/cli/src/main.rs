//! `cma-lab`: runs the laboratory's checks from the command line and writes
//! JSON/CSV results into an output directory.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use commands::Ctx;
use config::Overlay;
use error::CliError;
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "cma-lab", version, about = "Numerical laboratory for the complex Monge-Ampere equation")]
struct Cli {
    /// JSON config file; flags override its keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized check
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "CMA_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check det(u_{i jbar}) = F for a closed-form family at random points
    Verify(commands::verify::VerifyOpts),
    /// Complex Hessian of a family at one point
    Hessian(commands::hessian::HessianOpts),
    /// Damped Newton solve of a manufactured Dirichlet problem
    Solve(commands::solve::SolveOpts),
    /// Hölder, W^{2,p}, Lipschitz and convergence probes
    Probe(commands::probe::ProbeOpts),
    /// Moser iteration exponents and weights
    Moser(commands::moser::MoserOpts),
    /// Quadratic-jet viscosity tests on the singular set
    Viscosity(commands::viscosity::ViscosityOpts),
}

struct Global {
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
}

fn execute<T, F>(g: &Global, flags: T, name: &'static str, body: F) -> Result<(), CliError>
where
    T: DeserializeOwned + Default + Overlay,
    F: FnOnce(&Ctx, T) -> Result<(), CliError>,
{
    let (common, file) = config::load::<T>(g.config.as_deref(), name)?;
    let opts = flags.overlay(file);
    if let Some(n) = g.threads.or(common.threads) {
        if n == 0 {
            return Err(CliError::config("threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::config)?;
    }
    let out = OutDir::create(g.out.clone().or(common.out).unwrap_or_else(|| PathBuf::from(".")))?;
    let ctx = Ctx { out, seed: g.seed.or(common.seed), name };
    let start = Instant::now();
    let result = body(&ctx, opts);
    if let Err(CliError::Math(report)) = &result {
        let path = ctx.out.write_json("failure.json", report)?;
        println!("{}", serde_json::to_string(report)?);
        eprintln!("failure report written to {}", path.display());
    }
    let code = result.as_ref().err().map_or(0, CliError::exit_code);
    ctx.out.write_log(name, start.elapsed(), code)?;
    result
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = Global { config: cli.config, out: cli.out, seed: cli.seed, threads: cli.threads };
    match cli.command {
        Command::Verify(o) => execute(&g, o, "verify", commands::verify::run),
        Command::Hessian(o) => execute(&g, o, "hessian", commands::hessian::run),
        Command::Solve(o) => execute(&g, o, "solve", commands::solve::run),
        Command::Probe(o) => execute(&g, o, "probe", commands::probe::run),
        Command::Moser(o) => execute(&g, o, "moser", commands::moser::run),
        Command::Viscosity(o) => execute(&g, o, "viscosity", commands::viscosity::run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
