//! Refinement studies and parameter sweeps over the benchmark problems.

use std::fmt::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{PhysicalParams, ProblemData};
use crate::mesh::{generate_stacked_rect, Mesh, MeshError, Pattern, StackedGeometry};
use crate::quadrature::quad_rule;
use crate::solver::{newton_solve, NewtonOptions, Solution, SolverError};
use crate::verification::{
    compute_errors, eoc, example2_data, manufactured_example1, structural_invariants, ErrorReport,
    ExactSolution, Rates, StructuralReport, VerificationError,
};

/// Smallest number of levels a convergence study accepts.
pub const MIN_LEVELS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error("need ≥ {MIN_LEVELS} levels (got {0})")]
    TooFewLevels(usize),
    #[error("a convergence study needs a problem with a known exact solution")]
    NoExactSolution,
    #[error("empty {0} list")]
    EmptyList(&'static str),
}

/// Which problem to discretise.
#[derive(Clone)]
pub enum Problem {
    /// Manufactured solution on the stacked unit squares, all boundary data essential.
    Example1 { pattern: Pattern },
    /// Channel over a porous block with mixed boundary conditions.
    Example2 { pattern: Pattern },
    /// A fixed mesh with user data; the refinement parameter is ignored.
    Custom { mesh: Box<Mesh>, data: ProblemData },
}

/// Everything needed for one solve.
#[derive(Clone)]
pub struct Case {
    pub mesh: Mesh,
    pub data: ProblemData,
    pub exact: Option<ExactSolution>,
}

impl Problem {
    /// Domain of the built-in problems.
    pub fn geometry(&self) -> Option<StackedGeometry> {
        match self {
            Problem::Example1 { .. } => Some(StackedGeometry::unit_squares()),
            Problem::Example2 { .. } => Some(StackedGeometry::channel()),
            Problem::Custom { .. } => None,
        }
    }

    /// Vertical subdivisions `(ny_B, ny_D)` giving square cells for `nx`.
    pub fn default_ny(&self, nx: usize) -> (usize, usize) {
        match self {
            Problem::Example2 { .. } => ((nx / 2).max(1), (nx / 2).max(1)),
            _ => (nx, nx),
        }
    }

    /// Mesh with `nx` interface cells and `ny` (default: square cells) vertical cells.
    pub fn mesh(&self, nx: usize, ny: Option<(usize, usize)>) -> Result<Mesh, StudyError> {
        let (ny_b, ny_d) = ny.unwrap_or_else(|| self.default_ny(nx));
        match self {
            Problem::Example1 { pattern } | Problem::Example2 { pattern } => {
                let g = self.geometry().expect("built-in geometry");
                Ok(generate_stacked_rect(&g, nx, ny_b, ny_d, *pattern)?)
            }
            Problem::Custom { mesh, .. } => Ok(mesh.as_ref().clone()),
        }
    }

    /// Data, and the exact solution where one is known.
    pub fn data(
        &self,
        params: &PhysicalParams,
    ) -> Result<(ProblemData, Option<ExactSolution>), StudyError> {
        match self {
            Problem::Example1 { .. } => {
                let m = manufactured_example1(StackedGeometry::unit_squares(), params.clone())?;
                Ok((m.data, Some(m.exact)))
            }
            Problem::Example2 { .. } => Ok((example2_data(), None)),
            Problem::Custom { data, .. } => Ok((data.clone(), None)),
        }
    }

    /// Discretisation with `nx` cells along the interface.
    pub fn case(&self, nx: usize, params: &PhysicalParams) -> Result<Case, StudyError> {
        let mesh = self.mesh(nx, None)?;
        let (data, exact) = self.data(params)?;
        Ok(Case { mesh, data, exact })
    }

    pub fn has_exact_solution(&self) -> bool {
        matches!(self, Problem::Example1 { .. })
    }
}

/// Interface subdivisions `start, 2 start, 4 start, ...`.
pub fn refinement_sequence(start: usize, levels: usize) -> Vec<usize> {
    (0..levels).map(|k| start << k).collect()
}

/// Result of one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub nx: usize,
    pub h_brinkman: f64,
    pub h_darcy: f64,
    pub h_interface: f64,
    pub dof: usize,
    pub iterations: usize,
    pub errors: Option<ErrorReport>,
    pub invariants: StructuralReport,
}

pub fn level_result(case: &Case, solution: &Solution, nx: usize) -> LevelResult {
    let rule = quad_rule(6).expect("degree 6 rule");
    let mesh = &case.mesh;
    LevelResult {
        nx,
        h_brinkman: mesh.h_brinkman,
        h_darcy: mesh.h_darcy,
        h_interface: mesh.h_interface,
        dof: solution.report.dof_count,
        iterations: solution.report.iterations,
        errors: case
            .exact
            .as_ref()
            .map(|e| compute_errors(mesh, &solution.dofs, &solution.coeffs, e, &rule)),
        invariants: structural_invariants(mesh, &solution.dofs, &solution.coeffs, &case.data),
    }
}

/// Levels completed by a convergence study, and the failure that stopped it early.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub levels: Vec<LevelResult>,
    pub failure: Option<(usize, StudyError)>,
}

impl ConvergenceStudy {
    /// Rates between consecutive completed levels.
    pub fn rates(&self) -> Result<Vec<Rates>, StudyError> {
        let reports: Vec<ErrorReport> = self.levels.iter().filter_map(|l| l.errors).collect();
        Ok(eoc(&reports)?)
    }
}

/// Solves `problem` on `levels` successively refined meshes starting at `start_nx`.
/// `on_level` sees every completed level as soon as it is available.
pub fn convergence(
    problem: &Problem,
    params: &PhysicalParams,
    options: &NewtonOptions,
    start_nx: usize,
    levels: usize,
    mut on_level: impl FnMut(&LevelResult),
) -> Result<ConvergenceStudy, StudyError> {
    if levels < MIN_LEVELS {
        return Err(StudyError::TooFewLevels(levels));
    }
    if !problem.has_exact_solution() {
        return Err(StudyError::NoExactSolution);
    }
    let mut done = Vec::with_capacity(levels);
    for nx in refinement_sequence(start_nx, levels) {
        let outcome = problem.case(nx, params).and_then(|case| {
            let sol = newton_solve(&case.mesh, params, &case.data, options)?;
            Ok(level_result(&case, &sol, nx))
        });
        match outcome {
            Ok(level) => {
                on_level(&level);
                done.push(level);
            }
            Err(e) => {
                return Ok(ConvergenceStudy {
                    levels: done,
                    failure: Some((nx, e)),
                })
            }
        }
    }
    Ok(ConvergenceStudy {
        levels: done,
        failure: None,
    })
}

/// Header of the convergence table.
pub const CONVERGENCE_HEADER: &str =
    "level,h_B,h_D,h_Sigma,DOF,iter,e_uB,r_uB,e_pB,r_pB,e_uD,r_uD,e_pD,r_pD,e_lam,r_lam";

fn rate_field(r: Option<f64>) -> String {
    r.map_or_else(|| "--".to_string(), |r| format!("{r:.4}"))
}

/// One CSV row per level, rates against the previous level (`--` on the first).
pub fn convergence_csv(levels: &[LevelResult]) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for (i, l) in levels.iter().enumerate() {
        let e = l.errors.expect("convergence rows need errors");
        let rate = |f: fn(&ErrorReport) -> f64, h: fn(&LevelResult) -> f64| {
            (i > 0).then(|| {
                let (p, pe) = (&levels[i - 1], levels[i - 1].errors.expect("errors"));
                (f(&pe) / f(&e)).ln() / (h(p) / h(l)).ln()
            })
        };
        let hb = |l: &LevelResult| l.h_brinkman;
        let hd = |l: &LevelResult| l.h_darcy;
        let hs = |l: &LevelResult| l.h_interface;
        writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{},{},{:.6e},{},{:.6e},{},{:.6e},{},{:.6e},{},{:.6e},{}",
            i + 1,
            l.h_brinkman,
            l.h_darcy,
            l.h_interface,
            l.dof,
            l.iterations,
            e.u_brinkman,
            rate_field(rate(|e| e.u_brinkman, hb)),
            e.p_brinkman,
            rate_field(rate(|e| e.p_brinkman, hb)),
            e.u_darcy,
            rate_field(rate(|e| e.u_darcy, hd)),
            e.p_darcy,
            rate_field(rate(|e| e.p_darcy, hd)),
            e.lambda,
            rate_field(rate(|e| e.lambda, hs)),
        )
        .unwrap();
    }
    s
}

/// Newton iteration counts for one parameter pair over all mesh levels;
/// `None` where the solve failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub forchheimer: f64,
    pub k_darcy: f64,
    pub iterations: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Brinkman mesh size of each level (columns).
    pub h: Vec<f64>,
    pub k_brinkman: f64,
    pub rows: Vec<SweepRow>,
}

/// Newton counts for every `(F, K_D)` in the Cartesian product of the two lists
/// (F outermost) at every level of `nx_list`. Cells are solved in parallel; the
/// result order depends only on the inputs.
pub fn sweep(
    problem: &Problem,
    base: &PhysicalParams,
    options: &NewtonOptions,
    forchheimer: &[f64],
    k_darcy: &[f64],
    nx_list: &[usize],
) -> Result<Sweep, StudyError> {
    if forchheimer.is_empty() {
        return Err(StudyError::EmptyList("F"));
    }
    if k_darcy.is_empty() {
        return Err(StudyError::EmptyList("K_D"));
    }
    if nx_list.is_empty() {
        return Err(StudyError::EmptyList("mesh"));
    }
    let pairs: Vec<(f64, f64)> = forchheimer
        .iter()
        .flat_map(|&f| k_darcy.iter().map(move |&k| (f, k)))
        .collect();
    let params_of = |(f, k): (f64, f64)| {
        let mut p = base.clone();
        p.forchheimer = f;
        p.k_darcy = crate::assembly::Permeability::isotropic(k);
        p
    };
    let h = nx_list
        .iter()
        .map(|&nx| problem.case(nx, base).map(|c| c.mesh.h_brinkman))
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|i| (0..nx_list.len()).map(move |j| (i, j)))
        .collect();
    let counts: Vec<Option<usize>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let params = params_of(pairs[i]);
            let case = problem.case(nx_list[j], &params).ok()?;
            newton_solve(&case.mesh, &params, &case.data, options)
                .ok()
                .map(|s| s.report.iterations)
        })
        .collect();
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(i, &(f, k))| SweepRow {
            forchheimer: f,
            k_darcy: k,
            iterations: counts[i * nx_list.len()..(i + 1) * nx_list.len()].to_vec(),
        })
        .collect();
    let k_brinkman = base.k_brinkman.at([0.0, 0.0])[0][0];
    Ok(Sweep {
        h,
        k_brinkman,
        rows,
    })
}

/// Table of Newton counts: one row per `(F, K_D)`, one column per mesh level.
pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut s = String::from("F,K_B,K_D");
    for h in &sweep.h {
        write!(s, ",h={h:.4}").unwrap();
    }
    s.push('\n');
    for row in &sweep.rows {
        write!(
            s,
            "{},{},{}",
            row.forchheimer, sweep.k_brinkman, row.k_darcy
        )
        .unwrap();
        for c in &row.iterations {
            match c {
                Some(n) => write!(s, ",{n}").unwrap(),
                None => s.push_str(",fail"),
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 10.0, 3.0, 1.0, 0.1)
    }

    #[test]
    fn too_few_levels() {
        let p = Problem::Example1 {
            pattern: Pattern::RightDiagonal,
        };
        let err = convergence(&p, &params(), &NewtonOptions::default(), 4, 2, |_| {}).unwrap_err();
        assert_eq!(err, StudyError::TooFewLevels(2));
        assert!(err.to_string().contains("need ≥ 3 levels"));
    }

    #[test]
    fn convergence_needs_exact_solution() {
        let p = Problem::Example2 {
            pattern: Pattern::RightDiagonal,
        };
        let err = convergence(&p, &params(), &NewtonOptions::default(), 4, 3, |_| {}).unwrap_err();
        assert_eq!(err, StudyError::NoExactSolution);
    }

    #[test]
    fn csv_layout() {
        let p = Problem::Example1 {
            pattern: Pattern::RightDiagonal,
        };
        let mut seen = 0;
        let study = convergence(&p, &params(), &NewtonOptions::default(), 2, 3, |_| {
            seen += 1
        })
        .unwrap();
        assert_eq!(seen, 3);
        let csv = convergence_csv(&study.levels);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CONVERGENCE_HEADER);
        assert_eq!(lines.len(), 4);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 16);
        assert_eq!(first[7], "--");
        assert_eq!(first[15], "--");
        assert!(lines[2].split(',').all(|f| f != "--"));
        assert_eq!(study.rates().unwrap().len(), 2);
    }

    #[test]
    fn sweep_is_ordered_and_repeatable() {
        let p = Problem::Example1 {
            pattern: Pattern::RightDiagonal,
        };
        let opts = NewtonOptions::default();
        let a = sweep(&p, &params(), &opts, &[0.0, 10.0], &[1e-1, 1e-2], &[2, 4]).unwrap();
        let b = sweep(&p, &params(), &opts, &[0.0, 10.0], &[1e-1, 1e-2], &[2, 4]).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&b));
        assert_eq!(a.rows.len(), 4);
        assert_eq!((a.rows[1].forchheimer, a.rows[1].k_darcy), (0.0, 1e-2));
        assert!(a.rows[0].iterations.iter().all(|&c| c == Some(1)));
    }

    #[test]
    fn empty_lists_are_rejected() {
        let p = Problem::Example1 {
            pattern: Pattern::RightDiagonal,
        };
        let err = sweep(&p, &params(), &NewtonOptions::default(), &[], &[1.0], &[4]).unwrap_err();
        assert_eq!(err, StudyError::EmptyList("F"));
    }
}
