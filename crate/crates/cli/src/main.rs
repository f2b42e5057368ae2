use std::path::PathBuf;
use std::process::ExitCode;

use bfdarcy_cli::{
    cmd_convergence, cmd_mesh_gen, cmd_solve, cmd_sweep, read_config, CliError, Output,
};
use clap::{Parser, Subcommand};

/// Coupled Brinkman-Forchheimer / Darcy flow solver.
#[derive(Parser)]
#[command(name = "bfdarcy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of refinement levels (overrides the config).
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Also write VTK files of the solution.
    #[arg(long, global = true)]
    vtk: bool,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve one problem.
    Solve,
    /// Refinement study of the manufactured problem.
    Convergence,
    /// Newton counts over the F and K_D lists.
    Sweep,
    /// Write the mesh of the configured problem.
    MeshGen,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = read_config(cli.config.as_deref())?;
    if let Some(n) = cli.levels {
        config.set_levels(n);
    }
    let out = Output {
        dir: cli.out,
        vtk: cli.vtk || config.vtk,
        quiet: cli.quiet || config.quiet,
    };
    match cli.command {
        Command::Solve => cmd_solve(&config, &out),
        Command::Convergence => cmd_convergence(&config, &out),
        Command::Sweep => cmd_sweep(&config, &out),
        Command::MeshGen => cmd_mesh_gen(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
