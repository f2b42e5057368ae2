//! Global operators of the coupled problem.
//!
//! Unknown layout: `[u_B | u_D | p | lambda | zeta]`, where `u_B` are the
//! Bernardi-Raugel coefficients, `u_D` the RT0 edge fluxes, `p` one pressure per
//! triangle of either region, `lambda` the multiplier nodal values and `zeta`
//! the optional scalar enforcing a zero pressure mean.
//!
//! Weak form, for test functions `(v_B, v_D, q, xi)`:
//!
//! ```text
//! mu (grad u_B, grad v_B) + (K_B^-1 u_B, v_B) + F (|u_B|^{p-2} u_B, v_B) + (K_D^-1 u_D, v_D)
//!     - (p, div v_B) - (p, div v_D) + <v_B.n - v_D.n, lambda>   = (f_B, v_B) + (f_D, v_D) + boundary data
//! - (q, div u_B) - (q, div u_D) + <u_B.n - u_D.n, xi>           = -(g_D, q)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::elements::{
    dot, frobenius, mat_vec, norm, BrElement, BrSpace, Mat2, RtElement, RtSpace, TriangleGeometry,
    Vec2, BR_LOCAL, EDGE_GAUSS_POINTS, RT_LOCAL,
};
use crate::mesh::{build_interface, BoundaryTag, InterfaceData, Mesh, MeshError, Point, Region};
use crate::quadrature::{quad_rule, segment_points, QuadratureRule};
use crate::sparse::TripletMatrix;

pub type VectorField = Arc<dyn Fn(Point) -> Vec2 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Point) -> Mat2 + Send + Sync>;

/// Below this speed the `|w|^{p-4} (w . u) w` Newton term takes its limit value 0.
pub const SINGULAR_SPEED: f64 = 1e-12;

/// Degree of the rule used for the Darcy source, so that its elementwise means are
/// resolved well below the discretisation error.
pub const SOURCE_DEGREE: usize = 10;

/// Default weight of the rank-one pressure-mean penalty.
pub const DEFAULT_PENALTY: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("viscosity must be positive (got {0})")]
    Viscosity(f64),
    #[error("Forchheimer coefficient must be non-negative (got {0})")]
    Forchheimer(f64),
    #[error("exponent out of range [3,4] (got {0})")]
    Exponent(f64),
    #[error("permeability of the {0} region is not symmetric positive definite")]
    Permeability(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("conflicting prescriptions on dof {dof}: {first} vs {second}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Symmetric permeability tensor, uniform or varying in space.
#[derive(Clone)]
pub enum Permeability {
    Uniform(Mat2),
    Field(TensorField),
}

impl fmt::Debug for Permeability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Permeability::Uniform(k) => write!(f, "Uniform({k:?})"),
            Permeability::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl Permeability {
    pub fn isotropic(k: f64) -> Self {
        Permeability::Uniform([[k, 0.0], [0.0, k]])
    }

    pub fn at(&self, x: Point) -> Mat2 {
        match self {
            Permeability::Uniform(k) => *k,
            Permeability::Field(f) => f(x),
        }
    }

    pub fn inverse_at(&self, x: Point) -> Mat2 {
        invert(&self.at(x))
    }
}

pub fn invert(k: &Mat2) -> Mat2 {
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    [
        [k[1][1] / det, -k[0][1] / det],
        [-k[1][0] / det, k[0][0] / det],
    ]
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
}

fn is_spd(k: &Mat2) -> bool {
    k.iter().flatten().all(|v| v.is_finite())
        && (k[0][1] - k[1][0]).abs() <= 1e-12 * (k[0][1].abs() + 1.0)
        && min_eigenvalue(k) > 0.0
}

/// Viscosity, Forchheimer coefficient, exponent and permeabilities.
#[derive(Debug, Clone)]
pub struct PhysicalParams {
    pub mu: f64,
    pub forchheimer: f64,
    pub exponent: f64,
    pub k_brinkman: Permeability,
    pub k_darcy: Permeability,
}

impl PhysicalParams {
    pub fn new(mu: f64, forchheimer: f64, exponent: f64, k_brinkman: f64, k_darcy: f64) -> Self {
        PhysicalParams {
            mu,
            forchheimer,
            exponent,
            k_brinkman: Permeability::isotropic(k_brinkman),
            k_darcy: Permeability::isotropic(k_darcy),
        }
    }

    /// Checks of `mu`, `F` and `p` alone.
    pub fn validate_scalars(&self) -> Result<(), ParamError> {
        if !(self.mu > 0.0) {
            return Err(ParamError::Viscosity(self.mu));
        }
        if !(self.forchheimer >= 0.0) {
            return Err(ParamError::Forchheimer(self.forchheimer));
        }
        if !(3.0..=4.0).contains(&self.exponent) {
            return Err(ParamError::Exponent(self.exponent));
        }
        Ok(())
    }

    /// Scalar checks plus an eigenvalue test of `K^-1` at the quadrature points of `mesh`.
    pub fn validate(&self, mesh: &Mesh, rule: &QuadratureRule) -> Result<(), ParamError> {
        self.validate_scalars()?;
        for (region, k, name) in [
            (Region::Brinkman, &self.k_brinkman, "Brinkman"),
            (Region::Darcy, &self.k_darcy, "Darcy"),
        ] {
            let ok = match k {
                Permeability::Uniform(m) => is_spd(m),
                Permeability::Field(_) => mesh.triangles_in(region).all(|t| {
                    let geom = TriangleGeometry::of(mesh, t);
                    let ok = geom.quadrature(rule).all(|(_, x, _)| is_spd(&k.at(x)));
                    ok
                }),
            };
            if !ok {
                return Err(ParamError::Permeability(name));
            }
        }
        Ok(())
    }
}

/// Condition on a piece of the Brinkman boundary.
#[derive(Clone)]
pub enum BrinkmanBoundary {
    /// Essential: `u_B = g`.
    Velocity(VectorField),
    /// Natural: `sigma_B n = t`.
    Traction(VectorField),
}

/// Condition on a piece of the Darcy boundary.
#[derive(Clone)]
pub enum DarcyBoundary {
    /// Essential: `u_D . n = g . n` for the given vector field `g`.
    NormalFlux(VectorField),
    /// Natural: `p_D = g`.
    Pressure(ScalarField),
}

/// Sources and boundary data.
#[derive(Clone)]
pub struct ProblemData {
    pub f_brinkman: VectorField,
    pub f_darcy: VectorField,
    pub g_darcy: ScalarField,
    pub brinkman_bc: BTreeMap<BoundaryTag, BrinkmanBoundary>,
    pub darcy_bc: BTreeMap<BoundaryTag, DarcyBoundary>,
    /// Extra traction `t` entering as `<t, v_B>` on the interface.
    pub interface_traction: Option<VectorField>,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b: Vec<_> = self
            .brinkman_bc
            .iter()
            .map(|(t, c)| {
                (
                    t,
                    matches!(c, BrinkmanBoundary::Velocity(_))
                        .then_some("velocity")
                        .unwrap_or("traction"),
                )
            })
            .collect();
        let d: Vec<_> = self
            .darcy_bc
            .iter()
            .map(|(t, c)| {
                (
                    t,
                    matches!(c, DarcyBoundary::NormalFlux(_))
                        .then_some("flux")
                        .unwrap_or("pressure"),
                )
            })
            .collect();
        f.debug_struct("ProblemData")
            .field("brinkman_bc", &b)
            .field("darcy_bc", &d)
            .finish_non_exhaustive()
    }
}

pub fn zero_vector() -> VectorField {
    Arc::new(|_| [0.0, 0.0])
}

pub fn zero_scalar() -> ScalarField {
    Arc::new(|_| 0.0)
}

impl ProblemData {
    /// Zero sources, `u_B = 0` on every Brinkman boundary and `u_D . n = 0` on every Darcy boundary.
    pub fn homogeneous() -> Self {
        let brinkman_bc = [
            BoundaryTag::BrinkmanLeft,
            BoundaryTag::BrinkmanTop,
            BoundaryTag::BrinkmanRight,
        ]
        .into_iter()
        .map(|t| (t, BrinkmanBoundary::Velocity(zero_vector())))
        .collect();
        let darcy_bc = [
            BoundaryTag::DarcyLeft,
            BoundaryTag::DarcyBottom,
            BoundaryTag::DarcyRight,
        ]
        .into_iter()
        .map(|t| (t, DarcyBoundary::NormalFlux(zero_vector())))
        .collect();
        ProblemData {
            f_brinkman: zero_vector(),
            f_darcy: zero_vector(),
            g_darcy: zero_scalar(),
            brinkman_bc,
            darcy_bc,
            interface_traction: None,
        }
    }

    fn brinkman(&self, tag: BoundaryTag) -> BrinkmanBoundary {
        self.brinkman_bc
            .get(&tag)
            .cloned()
            .unwrap_or_else(|| BrinkmanBoundary::Velocity(zero_vector()))
    }

    fn darcy(&self, tag: BoundaryTag) -> DarcyBoundary {
        self.darcy_bc
            .get(&tag)
            .cloned()
            .unwrap_or_else(|| DarcyBoundary::NormalFlux(zero_vector()))
    }

    /// Pressure is only determined up to a constant when every boundary condition is essential.
    pub fn needs_mean_zero_pressure(&self, mesh: &Mesh) -> bool {
        mesh.edges
            .iter()
            .filter_map(|e| e.tag)
            .all(|tag| match tag.region() {
                Some(Region::Brinkman) => {
                    matches!(self.brinkman(tag), BrinkmanBoundary::Velocity(_))
                }
                Some(Region::Darcy) => matches!(self.darcy(tag), DarcyBoundary::NormalFlux(_)),
                None => true,
            })
    }
}

/// How the zero pressure mean is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PressureConstraint {
    /// Scalar multiplier `zeta`: `(p, 1) = 0` exactly.
    #[default]
    Exact,
    /// Adds `weight (p, 1)(q, 1)` to the pressure block, realised through `zeta`
    /// with a `-1/weight` diagonal entry to keep the matrix sparse.
    Penalty(f64),
}

#[derive(Debug, Clone)]
pub struct AssemblyOptions {
    pub rule: QuadratureRule,
    pub constraint: PressureConstraint,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            rule: quad_rule(6).expect("degree 6 rule"),
            constraint: PressureConstraint::Exact,
        }
    }
}

/// Global numbering of all unknowns and the prescribed values of constrained ones.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub br: BrSpace,
    pub rt: RtSpace,
    pub interface: InterfaceData,
    pub ud_offset: usize,
    pub p_offset: usize,
    pub lambda_offset: usize,
    /// Index of `zeta` when the pressure mean is constrained.
    pub mean_constraint: Option<usize>,
    pub total: usize,
    /// Essential degrees of freedom and their values, sorted by index.
    pub constrained: BTreeMap<usize, f64>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, data: &ProblemData) -> Result<DofMap, AssemblyError> {
        let br = BrSpace::new(mesh);
        let rt = RtSpace::new(mesh);
        let interface = build_interface(mesh)?;
        let ud_offset = br.len();
        let p_offset = ud_offset + rt.len();
        let lambda_offset = p_offset + mesh.num_triangles();
        let mut total = lambda_offset + interface.num_nodes();
        let mean_constraint = if data.needs_mean_zero_pressure(mesh) {
            total += 1;
            Some(total - 1)
        } else {
            None
        };

        let mut constrained = BTreeMap::new();
        let mut prescribe = |dof: usize, value: f64| -> Result<(), AssemblyError> {
            match constrained.insert(dof, value) {
                Some(old) if (old - value).abs() > 1e-12 * (1.0 + old.abs()) => {
                    Err(AssemblyError::ConflictingConstraint {
                        dof,
                        first: old,
                        second: value,
                    })
                }
                _ => Ok(()),
            }
        };
        for (e, edge) in mesh.edges.iter().enumerate() {
            let Some(tag) = edge.tag else { continue };
            match tag.region() {
                Some(Region::Brinkman) => {
                    if let BrinkmanBoundary::Velocity(g) = data.brinkman(tag) {
                        let t = edge.tris[0].unwrap();
                        let el = BrElement::of(mesh, t);
                        let k = mesh.tri_edges[t].iter().position(|&x| x == e).unwrap();
                        let local = el.dofs(|x| g(x));
                        let dofs = br.local_dofs(mesh, t);
                        for i in [(k + 1) % 3, (k + 2) % 3] {
                            prescribe(dofs[2 * i], local[2 * i])?;
                            prescribe(dofs[2 * i + 1], local[2 * i + 1])?;
                        }
                        prescribe(dofs[6 + k], local[6 + k])?;
                    }
                }
                Some(Region::Darcy) => {
                    if let DarcyBoundary::NormalFlux(g) = data.darcy(tag) {
                        let t = edge.tris[0].unwrap();
                        let k = mesh.tri_edges[t].iter().position(|&x| x == e).unwrap();
                        let flux = RtElement::of(mesh, t).dofs(|x| g(x))[k];
                        prescribe(ud_offset + rt.flux(e), flux)?;
                    }
                }
                None => {}
            }
        }

        Ok(DofMap {
            br,
            rt,
            interface,
            ud_offset,
            p_offset,
            lambda_offset,
            mean_constraint,
            total,
            constrained,
        })
    }

    pub fn num_velocity(&self) -> usize {
        self.p_offset
    }

    pub fn pressure(&self, t: usize) -> usize {
        self.p_offset + t
    }

    pub fn lambda(&self, node: usize) -> usize {
        self.lambda_offset + node
    }

    pub fn num_pressure(&self) -> usize {
        self.lambda_offset - self.p_offset
    }

    pub fn num_lambda(&self) -> usize {
        self.interface.num_nodes()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained.contains_key(&dof)
    }

    /// Dimension of the discrete trial space: free velocities, pressures
    /// (minus one when the mean is fixed) and multiplier nodes.
    pub fn dof_count(&self) -> usize {
        let pressures = self.num_pressure() - usize::from(self.mean_constraint.is_some());
        self.num_velocity() - self.constrained.len() + pressures + self.num_lambda()
    }
}

/// Linear system in triplet form with its right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: TripletMatrix,
    pub rhs: Vec<f64>,
}

/// `F |w|^{p-2}` and `F (p-2) |w|^{p-4}` at one point.
#[inline]
fn forchheimer_weights(params: &PhysicalParams, w: Vec2) -> (f64, f64) {
    let p = params.exponent;
    let f = params.forchheimer;
    let s = norm(w);
    let first = f * s.powf(p - 2.0);
    let second = if s < SINGULAR_SPEED {
        0.0
    } else {
        f * (p - 2.0) * s.powf(p - 4.0)
    };
    (first, second)
}

fn local_br_value(
    basis_values: &[Vec2; BR_LOCAL],
    coeffs: &[f64],
    dofs: &[usize; BR_LOCAL],
) -> Vec2 {
    let mut v = [0.0; 2];
    for i in 0..BR_LOCAL {
        let c = coeffs[dofs[i]];
        v[0] += c * basis_values[i][0];
        v[1] += c * basis_values[i][1];
    }
    v
}

fn region_triangles(mesh: &Mesh, region: Region) -> Vec<usize> {
    mesh.triangles_in(region).collect()
}

/// `[a(u), v]` for every velocity test function; zero in the remaining rows.
pub fn assemble_a_nonlinear(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PhysicalParams,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> Vec<f64> {
    let mut out = vec![0.0; dofs.total];
    for t in region_triangles(mesh, Region::Brinkman) {
        let el = BrElement::of(mesh, t);
        let local = dofs.br.local_dofs(mesh, t);
        let mut r = [0.0; BR_LOCAL];
        for (l, x, w) in el.geom.quadrature(rule) {
            let b = el.eval(l);
            let mut u = [0.0; 2];
            let mut gu = [[0.0; 2]; 2];
            for i in 0..BR_LOCAL {
                let c = coeffs[local[i]];
                for a in 0..2 {
                    u[a] += c * b.values[i][a];
                    for s in 0..2 {
                        gu[a][s] += c * b.grads[i][a][s];
                    }
                }
            }
            let kinv = params.k_brinkman.inverse_at(x);
            let (forch, _) = forchheimer_weights(params, u);
            let ku = mat_vec(&kinv, u);
            let drag = [ku[0] + forch * u[0], ku[1] + forch * u[1]];
            for i in 0..BR_LOCAL {
                r[i] += w * (params.mu * frobenius(&gu, &b.grads[i]) + dot(drag, b.values[i]));
            }
        }
        for i in 0..BR_LOCAL {
            out[local[i]] += r[i];
        }
    }
    for t in region_triangles(mesh, Region::Darcy) {
        let el = RtElement::of(mesh, t);
        let local = dofs.rt.local_dofs(mesh, t);
        for (_, x, w) in el.geom.quadrature(rule) {
            let vals = el.values(x);
            let mut u = [0.0; 2];
            for k in 0..RT_LOCAL {
                let c = coeffs[dofs.ud_offset + local[k]];
                u[0] += c * vals[k][0];
                u[1] += c * vals[k][1];
            }
            let ku = mat_vec(&params.k_darcy.inverse_at(x), u);
            for k in 0..RT_LOCAL {
                out[dofs.ud_offset + local[k]] += w * dot(ku, vals[k]);
            }
        }
    }
    out
}

/// Gateaux derivative of `a` at the Brinkman velocity held in `coeffs`.
pub fn assemble_da(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PhysicalParams,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> TripletMatrix {
    let nb = mesh.triangles_in(Region::Brinkman).count();
    let nd = mesh.num_triangles() - nb;
    let mut m =
        TripletMatrix::with_capacity(dofs.total, dofs.total, nb * BR_LOCAL * BR_LOCAL + nd * 9);
    for t in region_triangles(mesh, Region::Brinkman) {
        let el = BrElement::of(mesh, t);
        let local = dofs.br.local_dofs(mesh, t);
        let mut k = [[0.0; BR_LOCAL]; BR_LOCAL];
        for (l, x, w) in el.geom.quadrature(rule) {
            let b = el.eval(l);
            let wv = local_br_value(&b.values, coeffs, &local);
            let (first, second) = forchheimer_weights(params, wv);
            let kinv = params.k_brinkman.inverse_at(x);
            let wdot: [f64; BR_LOCAL] = std::array::from_fn(|i| dot(wv, b.values[i]));
            for j in 0..BR_LOCAL {
                let kj = mat_vec(&kinv, b.values[j]);
                for i in 0..BR_LOCAL {
                    k[i][j] += w
                        * (params.mu * frobenius(&b.grads[j], &b.grads[i])
                            + dot(kj, b.values[i])
                            + first * dot(b.values[j], b.values[i])
                            + second * wdot[j] * wdot[i]);
                }
            }
        }
        for i in 0..BR_LOCAL {
            for j in 0..BR_LOCAL {
                m.push(local[i], local[j], k[i][j]);
            }
        }
    }
    for t in region_triangles(mesh, Region::Darcy) {
        let el = RtElement::of(mesh, t);
        let local = dofs.rt.local_dofs(mesh, t);
        let mut k = [[0.0; RT_LOCAL]; RT_LOCAL];
        for (_, x, w) in el.geom.quadrature(rule) {
            let vals = el.values(x);
            let kinv = params.k_darcy.inverse_at(x);
            for j in 0..RT_LOCAL {
                let kj = mat_vec(&kinv, vals[j]);
                for i in 0..RT_LOCAL {
                    k[i][j] += w * dot(kj, vals[i]);
                }
            }
        }
        for i in 0..RT_LOCAL {
            for j in 0..RT_LOCAL {
                m.push(
                    dofs.ud_offset + local[i],
                    dofs.ud_offset + local[j],
                    k[i][j],
                );
            }
        }
    }
    m
}

/// Coupling operator `b`: rows are pressure and multiplier unknowns, columns velocities.
pub fn assemble_b(mesh: &Mesh, dofs: &DofMap, rule: &QuadratureRule) -> TripletMatrix {
    let mut m = TripletMatrix::new(dofs.total, dofs.total);
    for t in region_triangles(mesh, Region::Brinkman) {
        let el = BrElement::of(mesh, t);
        let local = dofs.br.local_dofs(mesh, t);
        let mut row = [0.0; BR_LOCAL];
        for (l, _, w) in el.geom.quadrature(rule) {
            let b = el.eval(l);
            for i in 0..BR_LOCAL {
                row[i] -= w * b.div(i);
            }
        }
        for i in 0..BR_LOCAL {
            m.push(dofs.pressure(t), local[i], row[i]);
        }
    }
    for t in region_triangles(mesh, Region::Darcy) {
        let el = RtElement::of(mesh, t);
        let local = dofs.rt.local_dofs(mesh, t);
        let divs = el.divs();
        for k in 0..RT_LOCAL {
            m.push(
                dofs.pressure(t),
                dofs.ud_offset + local[k],
                -divs[k] * el.geom.area,
            );
        }
    }

    let iface = &dofs.interface;
    let n = iface.normal;
    for (k, &(tb, td)) in iface.sides.iter().enumerate() {
        let br = BrElement::of(mesh, tb);
        let rt = RtElement::of(mesh, td);
        let br_dofs = dofs.br.local_dofs(mesh, tb);
        let rt_dofs = dofs.rt.local_dofs(mesh, td);
        let [a, b] = iface.edge_points[k];
        let len = iface.arclength[k + 1] - iface.arclength[k];
        let mut block_b = [[0.0; BR_LOCAL]; 2];
        let mut block_d = [[0.0; RT_LOCAL]; 2];
        let mut nodes = [0usize; 2];
        for (s, x, w) in segment_points(mesh.vertices[a], mesh.vertices[b], EDGE_GAUSS_POINTS) {
            let hats = iface.hats_at(k, iface.arclength[k] + s * len);
            let bb = br.eval(br.geom.barycentric(x));
            let vd = rt.values(x);
            for (h, &(node, xi)) in hats.iter().enumerate() {
                nodes[h] = node;
                for i in 0..BR_LOCAL {
                    block_b[h][i] += w * xi * dot(bb.values[i], n);
                }
                for j in 0..RT_LOCAL {
                    block_d[h][j] -= w * xi * dot(vd[j], n);
                }
            }
        }
        for h in 0..2 {
            let row = dofs.lambda(nodes[h]);
            for i in 0..BR_LOCAL {
                m.push(row, br_dofs[i], block_b[h][i]);
            }
            for j in 0..RT_LOCAL {
                m.push(row, dofs.ud_offset + rt_dofs[j], block_d[h][j]);
            }
        }
    }
    m
}

/// Data functionals: sources, natural boundary data and the interface traction.
pub fn assemble_load(
    mesh: &Mesh,
    dofs: &DofMap,
    data: &ProblemData,
    rule: &QuadratureRule,
) -> Vec<f64> {
    let mut out = vec![0.0; dofs.total];
    let source_rule = quad_rule(SOURCE_DEGREE).expect("source rule");
    for t in region_triangles(mesh, Region::Brinkman) {
        let el = BrElement::of(mesh, t);
        let local = dofs.br.local_dofs(mesh, t);
        for (l, x, w) in el.geom.quadrature(rule) {
            let b = el.eval(l);
            let f = (data.f_brinkman)(x);
            for i in 0..BR_LOCAL {
                out[local[i]] += w * dot(f, b.values[i]);
            }
        }
    }
    for t in region_triangles(mesh, Region::Darcy) {
        let el = RtElement::of(mesh, t);
        let local = dofs.rt.local_dofs(mesh, t);
        for (_, x, w) in el.geom.quadrature(rule) {
            let vals = el.values(x);
            let f = (data.f_darcy)(x);
            for k in 0..RT_LOCAL {
                out[dofs.ud_offset + local[k]] += w * dot(f, vals[k]);
            }
        }
        let g: f64 = el
            .geom
            .quadrature(&source_rule)
            .map(|(_, x, w)| w * (data.g_darcy)(x))
            .sum();
        out[dofs.pressure(t)] -= g;
    }

    let edge_integral = |e: usize, f: &dyn Fn(Point, Vec2) -> f64| -> f64 {
        let [a, b] = mesh.edges[e].vertices;
        let n = mesh.edge_normal(e);
        segment_points(mesh.vertices[a], mesh.vertices[b], EDGE_GAUSS_POINTS)
            .iter()
            .map(|&(_, x, w)| w * f(x, n))
            .sum()
    };

    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(tag) = edge.tag else { continue };
        let t = edge.tris[0].unwrap();
        match tag.region() {
            Some(Region::Brinkman) => {
                if let BrinkmanBoundary::Traction(g) = data.brinkman(tag) {
                    let el = BrElement::of(mesh, t);
                    let local = dofs.br.local_dofs(mesh, t);
                    for i in 0..BR_LOCAL {
                        let v = edge_integral(e, &|x, _| {
                            dot(g(x), el.eval(el.geom.barycentric(x)).values[i])
                        });
                        out[local[i]] += v;
                    }
                }
            }
            Some(Region::Darcy) => {
                if let DarcyBoundary::Pressure(g) = data.darcy(tag) {
                    let el = RtElement::of(mesh, t);
                    let local = dofs.rt.local_dofs(mesh, t);
                    for k in 0..RT_LOCAL {
                        let v = edge_integral(e, &|x, n| g(x) * dot(el.values(x)[k], n));
                        out[dofs.ud_offset + local[k]] -= v;
                    }
                }
            }
            None => {}
        }
    }

    if let Some(traction) = &data.interface_traction {
        let iface = &dofs.interface;
        for (k, &(tb, _)) in iface.sides.iter().enumerate() {
            let el = BrElement::of(mesh, tb);
            let local = dofs.br.local_dofs(mesh, tb);
            let [a, b] = iface.edge_points[k];
            for (_, x, w) in segment_points(mesh.vertices[a], mesh.vertices[b], EDGE_GAUSS_POINTS) {
                let vals = el.eval(el.geom.barycentric(x)).values;
                let tr = traction(x);
                for i in 0..BR_LOCAL {
                    out[local[i]] += w * dot(tr, vals[i]);
                }
            }
        }
    }
    out
}

/// Newton right-hand-side correction `F (p-2) (|w|^{p-2} w, v_B)`.
pub fn assemble_newton_correction(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PhysicalParams,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> Vec<f64> {
    let mut out = vec![0.0; dofs.total];
    if params.forchheimer == 0.0 {
        return out;
    }
    let scale = params.forchheimer * (params.exponent - 2.0);
    for t in region_triangles(mesh, Region::Brinkman) {
        let el = BrElement::of(mesh, t);
        let local = dofs.br.local_dofs(mesh, t);
        for (l, _, w) in el.geom.quadrature(rule) {
            let b = el.eval(l);
            let wv = local_br_value(&b.values, coeffs, &local);
            let c = scale * norm(wv).powf(params.exponent - 2.0);
            for i in 0..BR_LOCAL {
                out[local[i]] += w * c * dot(wv, b.values[i]);
            }
        }
    }
    out
}

/// Right-hand side of one Newton step linearised at `coeffs`.
pub fn assemble_rhs(
    mesh: &Mesh,
    dofs: &DofMap,
    data: &ProblemData,
    params: &PhysicalParams,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> Vec<f64> {
    let mut rhs = assemble_load(mesh, dofs, data, rule);
    for (r, c) in rhs
        .iter_mut()
        .zip(assemble_newton_correction(mesh, dofs, params, coeffs, rule))
    {
        *r += c;
    }
    rhs
}

/// Symmetric elimination of essential dofs and the pressure-mean constraint.
pub fn apply_constraints(
    mesh: &Mesh,
    system: SparseSystem,
    dofs: &DofMap,
    constraint: PressureConstraint,
) -> SparseSystem {
    let SparseSystem { matrix, mut rhs } = system;
    let mut fixed = vec![None; dofs.total];
    for (&d, &v) in &dofs.constrained {
        fixed[d] = Some(v);
    }
    let mut out = TripletMatrix::with_capacity(dofs.total, dofs.total, matrix.len() + dofs.total);
    for k in 0..matrix.len() {
        let (i, j, v) = (matrix.rows[k], matrix.cols[k], matrix.vals[k]);
        match (fixed[i], fixed[j]) {
            (None, None) => out.push(i, j, v),
            (None, Some(g)) => rhs[i] -= v * g,
            _ => {}
        }
    }
    for (&d, &v) in &dofs.constrained {
        out.push(d, d, 1.0);
        rhs[d] = v;
    }
    if let Some(z) = dofs.mean_constraint {
        for t in 0..mesh.num_triangles() {
            let area = mesh.area(t);
            out.push(z, dofs.pressure(t), area);
            out.push(dofs.pressure(t), z, area);
        }
        match constraint {
            PressureConstraint::Exact => out.push(z, z, 0.0),
            PressureConstraint::Penalty(weight) => out.push(z, z, -1.0 / weight),
        }
        rhs[z] = 0.0;
    }
    SparseSystem { matrix: out, rhs }
}

/// Full constrained Newton system linearised at `coeffs`.
pub fn assemble_newton_system(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PhysicalParams,
    data: &ProblemData,
    coeffs: &[f64],
    options: &AssemblyOptions,
) -> SparseSystem {
    let mut matrix = assemble_da(mesh, dofs, params, coeffs, &options.rule);
    let b = assemble_b(mesh, dofs, &options.rule);
    matrix.extend(&b);
    for k in 0..b.len() {
        matrix.push(b.cols[k], b.rows[k], b.vals[k]);
    }
    let rhs = assemble_rhs(mesh, dofs, data, params, coeffs, &options.rule);
    apply_constraints(mesh, SparseSystem { matrix, rhs }, dofs, options.constraint)
}

/// Residual of the discrete nonlinear problem at `coeffs`, with constrained
/// rows and the mean-constraint row set to zero:
/// velocity rows `a(u) + b(v)(p, lambda) - f`, pressure/multiplier rows `b(u)(q, xi) - g`.
pub fn nonlinear_residual(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PhysicalParams,
    data: &ProblemData,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> (Vec<f64>, Vec<f64>) {
    let mut r = assemble_a_nonlinear(mesh, dofs, params, coeffs, rule);
    let b = assemble_b(mesh, dofs, rule);
    for k in 0..b.len() {
        let (i, j, v) = (b.rows[k], b.cols[k], b.vals[k]);
        r[i] += v * coeffs[j];
        r[j] += v * coeffs[i];
    }
    if let Some(z) = dofs.mean_constraint {
        for t in 0..mesh.num_triangles() {
            r[dofs.pressure(t)] += mesh.area(t) * coeffs[z];
        }
    }
    let load = assemble_load(mesh, dofs, data, rule);
    for (ri, li) in r.iter_mut().zip(&load) {
        *ri -= li;
    }
    for &d in dofs.constrained.keys() {
        r[d] = 0.0;
    }
    if let Some(z) = dofs.mean_constraint {
        r[z] = 0.0;
    }
    (r, load)
}
