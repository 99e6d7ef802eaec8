use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use roamscope::orbits::Branch;
use roamscope_cli::{run, CliError, CliResult, Command, Overrides, RawConfig, RunConfig};

/// Isokinetic CH4+ roaming survey: stationary points, periodic orbits,
/// Lagrangian descriptor fields, manifold traces and trajectory classes.
#[derive(Debug, Parser)]
#[command(name = "roamscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $ROAMSCOPE_OUT, else the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Descriptor horizon.
    #[arg(long, global = true)]
    tau: Option<f64>,

    /// Grid resolution per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Sense of rotation of the orbits.
    #[arg(long, global = true, value_enum)]
    branch: Option<BranchArg>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Stationary points of the potential, optionally with a U(r, θ) grid.
    Potential,
    /// Outer radius, refined inner orbit, periods and Floquet multipliers.
    Orbits,
    /// Lagrangian descriptor field over a surface of section.
    Field,
    /// W_i^u and W_o^s traces from two fields, and their overlay.
    Extract {
        /// Backward inner-descriptor field (LDG v1).
        #[arg(long)]
        inner: Option<PathBuf>,
        /// Forward radial-rate field (LDG v1).
        #[arg(long)]
        outer: Option<PathBuf>,
    },
    /// Trajectory classes over a surface of section.
    Classify,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchArg {
    Plus,
    Minus,
}

fn execute(cli: Cli) -> CliResult<()> {
    let raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    let (command, inner_field, outer_field) = match cli.command {
        Cmd::Potential => (Command::Potential, None, None),
        Cmd::Orbits => (Command::Orbits, None, None),
        Cmd::Field => (Command::Field, None, None),
        Cmd::Extract { inner, outer } => (Command::Extract, inner, outer),
        Cmd::Classify => (Command::Classify, None, None),
    };
    let overrides = Overrides {
        out: cli.out,
        tau: cli.tau,
        grid: cli.grid,
        threads: cli.threads,
        branch: cli.branch.map(|b| match b {
            BranchArg::Plus => Branch::Plus,
            BranchArg::Minus => Branch::Minus,
        }),
        inner_field,
        outer_field,
    };
    let env_out = std::env::var_os("ROAMSCOPE_OUT").filter(|v| !v.is_empty()).map(PathBuf::from);
    let cfg = RunConfig::resolve(&raw, &overrides, env_out)?;
    if let Some(k) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    run(command, &cfg)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("roamscope: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
