//! Newton iteration for the coupled nonlinear problem.

use thiserror::Error;

use crate::assembly::{
    assemble_newton_system, AssemblyError, AssemblyOptions, DofMap, ParamError, PhysicalParams,
    ProblemData,
};
use crate::mesh::Mesh;
use crate::sparse::{
    amd_order, relative_residual, DenseLu, LinearSolveError, SparseLu, DENSE_THRESHOLD,
    PIVOT_THRESHOLD,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("linear solve failed in Newton step {step}: {source}")]
    Linear {
        step: usize,
        source: LinearSolveError,
    },
    #[error("Newton iterate is not finite after step {0}")]
    NonFinite(usize),
    #[error(
        "Newton did not converge in {iterations} steps (last relative increment {increment:e})"
    )]
    NotConverged { iterations: usize, increment: f64 },
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Stop once `|c_new - c_old| / |c_new|` drops to this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting value of `u_B` at every vertex; bubbles and all other unknowns start at zero.
    pub initial_velocity: [f64; 2],
    pub assembly: AssemblyOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-6,
            max_iter: 50,
            initial_velocity: [0.1, 0.0],
            assembly: AssemblyOptions::default(),
        }
    }
}

/// Coefficient blocks of a discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFields {
    pub u_brinkman: Vec<f64>,
    pub u_darcy: Vec<f64>,
    /// One value per triangle, both regions.
    pub pressure: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl SolutionFields {
    pub fn from_coeffs(dofs: &DofMap, c: &[f64]) -> Self {
        SolutionFields {
            u_brinkman: c[..dofs.ud_offset].to_vec(),
            u_darcy: c[dofs.ud_offset..dofs.p_offset].to_vec(),
            pressure: c[dofs.p_offset..dofs.lambda_offset].to_vec(),
            lambda: c[dofs.lambda_offset..dofs.lambda_offset + dofs.num_lambda()].to_vec(),
        }
    }

    pub fn to_coeffs(&self, dofs: &DofMap) -> Vec<f64> {
        let mut c = Vec::with_capacity(dofs.total);
        c.extend_from_slice(&self.u_brinkman);
        c.extend_from_slice(&self.u_darcy);
        c.extend_from_slice(&self.pressure);
        c.extend_from_slice(&self.lambda);
        c.resize(dofs.total, 0.0);
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    /// `|c_m - c_{m-1}| / |c_m|`.
    pub increment: f64,
    /// Relative residual of the linear solve.
    pub linear_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Number of Newton steps (linear solves) performed.
    pub iterations: usize,
    pub steps: Vec<NewtonStep>,
    /// Dimension of the discrete trial space.
    pub dof_count: usize,
    /// Size of the assembled linear system.
    pub unknowns: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub dofs: DofMap,
    /// Full coefficient vector in the global layout.
    pub coeffs: Vec<f64>,
    pub fields: SolutionFields,
    pub report: SolveReport,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(clippy::large_enum_variant)]
enum Factorization {
    Dense(DenseLu),
    Sparse(SparseLu),
}

/// Initial Newton iterate.
pub fn initial_guess(dofs: &DofMap, velocity: [f64; 2]) -> Vec<f64> {
    let mut c = vec![0.0; dofs.total];
    for &v in &dofs.br.vertices {
        c[dofs.br.vertex_component(v, 0)] = velocity[0];
        c[dofs.br.vertex_component(v, 1)] = velocity[1];
    }
    c
}

/// Solves the discrete problem by Newton's method.
///
/// Each step assembles the linearisation at the current iterate and solves for
/// the next iterate directly. With a zero Forchheimer coefficient the problem is
/// linear and a single step is taken.
pub fn newton_solve(
    mesh: &Mesh,
    params: &PhysicalParams,
    data: &ProblemData,
    options: &NewtonOptions,
) -> Result<Solution, SolverError> {
    params.validate(mesh, &options.assembly.rule)?;
    let dofs = DofMap::new(mesh, data)?;
    let mut current = initial_guess(&dofs, options.initial_velocity);
    let mut steps = Vec::new();
    let linear = params.forchheimer == 0.0;

    for step in 1..=options.max_iter {
        let system = assemble_newton_system(mesh, &dofs, params, data, &current, &options.assembly);
        let a = system.matrix.to_csc();
        let fact = if a.ncols < DENSE_THRESHOLD {
            DenseLu::factor(&a).map(Factorization::Dense)
        } else {
            let q = amd_order(&a);
            SparseLu::factor_with_order(&a, q, PIVOT_THRESHOLD).map(Factorization::Sparse)
        }
        .map_err(|source| SolverError::Linear { step, source })?;
        let next = match &fact {
            Factorization::Dense(lu) => lu.solve(&system.rhs),
            Factorization::Sparse(lu) => lu.solve(&system.rhs),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite(step));
        }
        let diff: Vec<f64> = next.iter().zip(&current).map(|(a, b)| a - b).collect();
        let norm_next = l2(&next);
        let increment = if norm_next > 0.0 {
            l2(&diff) / norm_next
        } else {
            l2(&diff)
        };
        steps.push(NewtonStep {
            increment,
            linear_residual: relative_residual(&a, &next, &system.rhs),
        });
        current = next;
        if linear || increment <= options.tol {
            let fields = SolutionFields::from_coeffs(&dofs, &current);
            let report = SolveReport {
                iterations: steps.len(),
                steps,
                dof_count: dofs.dof_count(),
                unknowns: dofs.total,
            };
            return Ok(Solution {
                dofs,
                coeffs: current,
                fields,
                report,
            });
        }
    }
    Err(SolverError::NotConverged {
        iterations: options.max_iter,
        increment: steps.last().map_or(f64::NAN, |s| s.increment),
    })
}
