//! Commands behind the `bfdarcy` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bfdarcy::mesh::{load_mesh, save_mesh, Mesh, MeshError};
use bfdarcy::solver::{newton_solve, SolverError};
use bfdarcy::study::{
    convergence, convergence_csv, level_result, sweep, sweep_csv, Case, LevelResult, Problem,
    StudyError,
};
use bfdarcy::verification::interface_normal_speed;
use bfdarcy::vtk::{domain_vtk, interface_vtk};
use thiserror::Error;

use config::{ConfigError, ProblemKind, RunConfig};

/// A failure mapped to the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input data.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Params(_) | SolverError::Assembly(_) => CliError::Usage(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Mesh(m) => m.into(),
            StudyError::Solver(s) => s.into(),
            StudyError::Verification(_) => CliError::Solver(e.to_string()),
            StudyError::TooFewLevels(_)
            | StudyError::NoExactSolution
            | StudyError::EmptyList(_) => CliError::Usage(e.to_string()),
        }
    }
}

/// Where results go and how much is printed.
#[derive(Debug, Clone)]
pub struct Output {
    pub dir: PathBuf,
    pub vtk: bool,
    pub quiet: bool,
}

impl Output {
    fn say(&self, text: &str) {
        if !self.quiet {
            println!("{text}");
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Reads a configuration file; `None` gives the defaults.
pub fn read_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::parse("")?),
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(RunConfig::parse(&text)?)
        }
    }
}

fn problem(config: &RunConfig, mesh: Option<Mesh>) -> Result<Problem, CliError> {
    let pattern = config.pattern;
    Ok(match config.problem {
        ProblemKind::Example1 => Problem::Example1 { pattern },
        ProblemKind::Example2 => Problem::Example2 { pattern },
        ProblemKind::Custom => {
            let mesh = match mesh {
                Some(m) => m,
                None => Problem::Example1 { pattern }.mesh(config.nx, config.ny)?,
            };
            Problem::Custom {
                mesh: Box::new(mesh),
                data: config.custom.problem_data(),
            }
        }
    })
}

fn mesh_of(config: &RunConfig) -> Result<Mesh, CliError> {
    match &config.mesh {
        Some(path) => Ok(load_mesh(path)?),
        None => Ok(problem(config, None)?.mesh(config.nx, config.ny)?),
    }
}

const SOLVE_HEADER: &str =
    "problem,triangles,DOF,iter,increment,pressure_mean,interface_residual,darcy_divergence,max_un_sigma,e_uB,e_pB,e_uD,e_pD,e_lam";

fn solve_row(
    config: &RunConfig,
    level: &LevelResult,
    increment: f64,
    speed: f64,
    triangles: usize,
) -> String {
    let mut s = format!(
        "{},{},{},{},{:e},{:e},{:e},{:e},{:.6e}",
        config.problem.as_str(),
        triangles,
        level.dof,
        level.iterations,
        increment,
        level.invariants.pressure_mean,
        level.invariants.interface_residual,
        level.invariants.darcy_divergence,
        speed
    );
    match level.errors {
        Some(e) => {
            for v in [e.u_brinkman, e.p_brinkman, e.u_darcy, e.p_darcy, e.lambda] {
                write!(s, ",{v:.6e}").unwrap();
            }
        }
        None => s.push_str(",--,--,--,--,--"),
    }
    s
}

/// One Newton solve: summary on stdout, a one-row CSV and optional VTK files.
pub fn cmd_solve(config: &RunConfig, out: &Output) -> Result<(), CliError> {
    let mesh = mesh_of(config)?;
    let problem = problem(config, Some(mesh.clone()))?;
    let (data, exact) = problem.data(&config.params)?;
    let case = Case { mesh, data, exact };
    let sol = newton_solve(&case.mesh, &config.params, &case.data, &config.newton)?;
    let level = level_result(&case, &sol, config.nx);
    let speed = interface_normal_speed(&case.mesh, &sol.dofs, &sol.coeffs);
    let increment = sol.report.steps.last().map_or(0.0, |s| s.increment);

    out.say(&format!("problem: {}", config.problem.as_str()));
    out.say(&format!("triangles: {}", case.mesh.num_triangles()));
    out.say(&format!("dof: {}", sol.report.dof_count));
    for (k, step) in sol.report.steps.iter().enumerate() {
        out.say(&format!(
            "  step {}: increment {:.3e}, linear residual {:.1e}",
            k + 1,
            step.increment,
            step.linear_residual
        ));
    }
    out.say(&format!("iterations: {}", sol.report.iterations));
    out.say(&format!("|mean p|: {:.3e}", level.invariants.pressure_mean));
    out.say(&format!(
        "interface residual: {:.3e}",
        level.invariants.interface_residual
    ));
    out.say(&format!(
        "darcy divergence defect: {:.3e}",
        level.invariants.darcy_divergence
    ));
    out.say(&format!("max |u.n| on interface: {speed:.6e}"));
    if let Some(e) = level.errors {
        out.say(&format!(
            "errors: u_B {:.4e}  p_B {:.4e}  u_D {:.4e}  p_D {:.4e}  lambda {:.4e}",
            e.u_brinkman, e.p_brinkman, e.u_darcy, e.p_darcy, e.lambda
        ));
    }

    let csv = format!(
        "{SOLVE_HEADER}\n{}\n",
        solve_row(config, &level, increment, speed, case.mesh.num_triangles())
    );
    let path = out.write(config.csv.as_deref().unwrap_or("solve.csv"), &csv)?;
    out.say(&format!("wrote {}", path.display()));
    if out.vtk {
        let a = out.write(
            "solution.vtk",
            &domain_vtk(&case.mesh, &sol.dofs, &sol.coeffs),
        )?;
        let b = out.write(
            "interface.vtk",
            &interface_vtk(&case.mesh, &sol.dofs, &sol.coeffs),
        )?;
        out.say(&format!("wrote {} and {}", a.display(), b.display()));
    }
    Ok(())
}

/// Refinement study of the manufactured problem. Completed levels are written
/// even when a later level fails.
pub fn cmd_convergence(config: &RunConfig, out: &Output) -> Result<(), CliError> {
    config.check_levels()?;
    let problem = problem(config, None)?;
    let study = convergence(
        &problem,
        &config.params,
        &config.newton,
        config.start_nx,
        config.levels,
        |l| {
            out.say(&format!(
                "nx = {:>4}  DOF = {:>8}  iterations = {}",
                l.nx, l.dof, l.iterations
            ));
        },
    )?;
    let name = config.csv.as_deref().unwrap_or("convergence.csv");
    let path = out.write(name, &convergence_csv(&study.levels))?;
    out.say(&format!("wrote {}", path.display()));
    if let Some((nx, err)) = study.failure {
        let e: CliError = err.into();
        return Err(match e {
            CliError::Usage(m) => CliError::Usage(format!("level nx = {nx}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("level nx = {nx}: {m}")),
            CliError::Io(m) => CliError::Io(m),
        });
    }
    Ok(())
}

/// Newton counts over the `F` and `K_D` lists at every mesh level.
pub fn cmd_sweep(config: &RunConfig, out: &Output) -> Result<(), CliError> {
    let problem = problem(config, None)?;
    let nx_list = match config.problem {
        ProblemKind::Custom => vec![config.nx],
        _ => config.nx_list.clone(),
    };
    let result = sweep(
        &problem,
        &config.params,
        &config.newton,
        &config.f_list,
        &config.k_darcy_list,
        &nx_list,
    )?;
    let csv = sweep_csv(&result);
    if !out.quiet {
        print!("{csv}");
    }
    let path = out.write(config.csv.as_deref().unwrap_or("sweep.csv"), &csv)?;
    out.say(&format!("wrote {}", path.display()));
    Ok(())
}

/// Writes the mesh of the configured problem.
pub fn cmd_mesh_gen(config: &RunConfig, out: &Output) -> Result<(), CliError> {
    let mesh = mesh_of(config)?;
    fs::create_dir_all(&out.dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out.dir.display())))?;
    let path = out.dir.join("mesh.txt");
    save_mesh(&mesh, &path)?;
    out.say(&format!(
        "vertices: {}  triangles: {}  interface edges: {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.interface_edge_count()
    ));
    out.say(&format!("wrote {}", path.display()));
    Ok(())
}
