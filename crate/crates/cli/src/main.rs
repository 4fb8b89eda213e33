//! `confnav solve|simulate|verify <manifest>`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 input error. Errors are
//! printed to stderr as one JSON object `{error, message, exit_code}`.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::manifest::{Overrides, RunManifest};

#[derive(Parser)]
#[command(name = "confnav", version, about = "Conformal navigation for polygonal workspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the workspace map and write summary.json, boundary_images.csv and map.json.
    Solve(RunArgs),
    /// Integrate the manifest's start points on a solved map.
    Simulate(RunArgs),
    /// Check the invariant families on a solved map and write verify.json.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    manifest: PathBuf,
    /// Nodes per boundary.
    #[arg(long = "nodes", value_name = "m")]
    nodes: Option<usize>,
    /// Koebe convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Navigation function sharpness.
    #[arg(long)]
    k: Option<u32>,
    /// Controller gain K.
    #[arg(long)]
    gain: Option<f64>,
    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "dir")]
    out: Option<PathBuf>,
    /// Write the first round's discretized systems to kernels_debug.json.
    #[arg(long)]
    debug_kernels: bool,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest, CliError> {
        let o = Overrides { nodes: self.nodes, tol: self.tol, k: self.k, gain: self.gain, dt: self.dt, out: self.out.clone() };
        RunManifest::load(&self.manifest, &o)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => commands::solve(&a.manifest()?, a.debug_kernels),
        Command::Simulate(a) => commands::simulate(&a.manifest()?),
        Command::Verify(a) => commands::verify(&a.manifest()?).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
