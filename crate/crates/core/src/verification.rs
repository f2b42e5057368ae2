//! Manufactured solutions, error norms, convergence rates and invariant checks.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::assembly::{
    assemble_a_nonlinear, assemble_b, assemble_da, BrinkmanBoundary, DarcyBoundary, DofMap,
    PhysicalParams, ProblemData, ScalarField, TensorField, VectorField, SOURCE_DEGREE,
};
use crate::elements::{
    dot, interpolate_br, interpolate_rt0, mat_vec, norm, BrElement, BrSpace, RtElement, RtSpace,
    TriangleGeometry, Vec2,
};
use crate::mesh::{BoundaryTag, Mesh, Point, Region, StackedGeometry};
use crate::quadrature::{quad_rule, segment_points, QuadratureRule};

/// Gauss points per interface edge in the multiplier error.
const INTERFACE_GAUSS_POINTS: usize = 6;

/// Closed-form fields of a manufactured solution.
#[derive(Clone)]
pub struct ExactSolution {
    pub u_brinkman: VectorField,
    pub grad_u_brinkman: TensorField,
    pub u_darcy: VectorField,
    pub div_u_darcy: ScalarField,
    pub p_brinkman: ScalarField,
    pub p_darcy: ScalarField,
    pub lambda: ScalarField,
    pub grad_lambda: VectorField,
}

/// A manufactured problem: exact fields and the data they induce.
#[derive(Clone)]
pub struct Manufactured {
    pub geometry: StackedGeometry,
    pub params: PhysicalParams,
    pub exact: ExactSolution,
    pub data: ProblemData,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error(
        "manufactured solution needs the interface on y = 0.5 and the Darcy block (-0.5,0.5)^2"
    )]
    Geometry,
    #[error("identical mesh sizes {0} in a rate computation")]
    IdenticalH(f64),
    #[error("need at least two levels for rates")]
    TooFewLevels,
}

fn exact_example1() -> ExactSolution {
    ExactSolution {
        u_brinkman: Arc::new(|x| {
            [
                (PI * x[0]).cos() * (PI * x[1]).sin(),
                -(PI * x[0]).sin() * (PI * x[1]).cos(),
            ]
        }),
        grad_u_brinkman: Arc::new(|x| {
            let (s1, c1) = (PI * x[0]).sin_cos();
            let (s2, c2) = (PI * x[1]).sin_cos();
            [[-PI * s1 * s2, PI * c1 * c2], [-PI * c1 * c2, PI * s1 * s2]]
        }),
        u_darcy: Arc::new(|x| {
            [
                (PI * x[0]).cos() * x[1].exp(),
                x[0].exp() * (PI * x[1]).cos(),
            ]
        }),
        div_u_darcy: Arc::new(|x| {
            -PI * (PI * x[0]).sin() * x[1].exp() - PI * x[0].exp() * (PI * x[1]).sin()
        }),
        p_brinkman: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
        p_darcy: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
        lambda: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
        grad_lambda: Arc::new(|x| {
            [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ]
        }),
    }
}

fn pressure_gradient(x: Point) -> Vec2 {
    [
        PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
    ]
}

/// Smooth manufactured solution on the stacked unit squares.
///
/// Both velocities are prescribed on the outer boundary (Dirichlet for `u_B`,
/// normal flux for `u_D`). The exact fields violate the traction balance on the
/// interface, so the defect `sigma_B n + p_D n` is supplied as an interface load.
pub fn manufactured_example1(
    geometry: StackedGeometry,
    params: PhysicalParams,
) -> Result<Manufactured, VerificationError> {
    let expected = StackedGeometry::unit_squares();
    if geometry.y_interface != expected.y_interface
        || geometry.x_min != expected.x_min
        || geometry.x_max != expected.x_max
        || geometry.y_bottom != expected.y_bottom
    {
        return Err(VerificationError::Geometry);
    }
    let exact = exact_example1();

    let (u, mu, f, exponent) = (
        exact.u_brinkman.clone(),
        params.mu,
        params.forchheimer,
        params.exponent,
    );
    let kb = params.k_brinkman.clone();
    let f_brinkman: VectorField = Arc::new(move |x| {
        let v = u(x);
        let kv = mat_vec(&kb.inverse_at(x), v);
        let forch = f * norm(v).powf(exponent - 2.0);
        let gp = pressure_gradient(x);
        // -mu Laplacian(u) = 2 pi^2 mu u for this field.
        std::array::from_fn(|r| kv[r] + forch * v[r] + 2.0 * PI * PI * mu * v[r] + gp[r])
    });
    let (ud, kd) = (exact.u_darcy.clone(), params.k_darcy.clone());
    let f_darcy: VectorField = Arc::new(move |x| {
        let kv = mat_vec(&kd.inverse_at(x), ud(x));
        let gp = pressure_gradient(x);
        [kv[0] + gp[0], kv[1] + gp[1]]
    });

    let n = [0.0, -1.0];
    let (grad, pb, pd) = (
        exact.grad_u_brinkman.clone(),
        exact.p_brinkman.clone(),
        exact.p_darcy.clone(),
    );
    let traction: VectorField = Arc::new(move |x| {
        let g = grad(x);
        let gn = mat_vec(&g, n);
        let jump = pd(x) - pb(x);
        [mu * gn[0] + jump * n[0], mu * gn[1] + jump * n[1]]
    });

    let mut data = ProblemData::homogeneous();
    data.f_brinkman = f_brinkman;
    data.f_darcy = f_darcy;
    data.g_darcy = exact.div_u_darcy.clone();
    for tag in [
        BoundaryTag::BrinkmanLeft,
        BoundaryTag::BrinkmanTop,
        BoundaryTag::BrinkmanRight,
    ] {
        data.brinkman_bc
            .insert(tag, BrinkmanBoundary::Velocity(exact.u_brinkman.clone()));
    }
    for tag in [
        BoundaryTag::DarcyLeft,
        BoundaryTag::DarcyBottom,
        BoundaryTag::DarcyRight,
    ] {
        data.darcy_bc
            .insert(tag, DarcyBoundary::NormalFlux(exact.u_darcy.clone()));
    }
    data.interface_traction = Some(traction);
    Ok(Manufactured {
        geometry,
        params,
        exact,
        data,
    })
}

/// Channel over a porous block: parabolic inflow on the left of the free-flow
/// region, no-slip on top, traction-free outflow on the right, zero pressure at
/// the bottom of the porous block and impermeable porous side walls.
pub fn example2_data() -> ProblemData {
    let mut data = ProblemData::homogeneous();
    data.brinkman_bc.insert(
        BoundaryTag::BrinkmanLeft,
        BrinkmanBoundary::Velocity(Arc::new(|x| [-10.0 * x[1] * (x[1] - 1.0), 0.0])),
    );
    data.brinkman_bc.insert(
        BoundaryTag::BrinkmanRight,
        BrinkmanBoundary::Traction(Arc::new(|_| [0.0, 0.0])),
    );
    data.darcy_bc.insert(
        BoundaryTag::DarcyBottom,
        DarcyBoundary::Pressure(Arc::new(|_| 0.0)),
    );
    data
}

pub fn example2_params(forchheimer: f64) -> PhysicalParams {
    PhysicalParams::new(1.0, forchheimer, 4.0, 1e-1, 1e-3)
}

/// Errors of one discrete solution and the mesh sizes they belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub h_brinkman: f64,
    pub h_darcy: f64,
    pub h_interface: f64,
    /// H1 error of `u_B`.
    pub u_brinkman: f64,
    /// H(div) error of `u_D`.
    pub u_darcy: f64,
    pub p_brinkman: f64,
    pub p_darcy: f64,
    /// Geometric mean of the L2 and H1 interface errors of the multiplier.
    pub lambda: f64,
    pub lambda_l2: f64,
    pub lambda_h1: f64,
}

/// `|xi|_{(0,1)} = sqrt(|xi|_0 |xi|_1)`.
pub fn interface_norm(l2: f64, h1: f64) -> f64 {
    (l2 * h1).sqrt()
}

pub fn compute_errors(
    mesh: &Mesh,
    dofs: &DofMap,
    coeffs: &[f64],
    exact: &ExactSolution,
    rule: &QuadratureRule,
) -> ErrorReport {
    let mut ub = 0.0;
    let mut pb = 0.0;
    for t in mesh.triangles_in(Region::Brinkman) {
        let geom = TriangleGeometry::of(mesh, t);
        let ph = coeffs[dofs.pressure(t)];
        for (l, x, w) in geom.quadrature(rule) {
            let (v, g) = dofs.br.eval(mesh, coeffs, t, l);
            let (ve, ge) = ((exact.u_brinkman)(x), (exact.grad_u_brinkman)(x));
            let mut sq = (v[0] - ve[0]).powi(2) + (v[1] - ve[1]).powi(2);
            for r in 0..2 {
                for s in 0..2 {
                    sq += (g[r][s] - ge[r][s]).powi(2);
                }
            }
            ub += w * sq;
            pb += w * ((exact.p_brinkman)(x) - ph).powi(2);
        }
    }
    let mut ud = 0.0;
    let mut pd = 0.0;
    let rt_coeffs = &coeffs[dofs.ud_offset..];
    for t in mesh.triangles_in(Region::Darcy) {
        let geom = TriangleGeometry::of(mesh, t);
        let ph = coeffs[dofs.pressure(t)];
        for (_, x, w) in geom.quadrature(rule) {
            let (v, d) = dofs.rt.eval(mesh, rt_coeffs, t, x);
            let ve = (exact.u_darcy)(x);
            ud += w
                * ((v[0] - ve[0]).powi(2)
                    + (v[1] - ve[1]).powi(2)
                    + (d - (exact.div_u_darcy)(x)).powi(2));
            pd += w * ((exact.p_darcy)(x) - ph).powi(2);
        }
    }

    let iface = &dofs.interface;
    let mut l0 = 0.0;
    let mut l1 = 0.0;
    for k in 0..iface.edges.len() {
        let [a, b] = iface.edge_points[k];
        let (pa, pb_) = (mesh.vertices[a], mesh.vertices[b]);
        let len = iface.arclength[k + 1] - iface.arclength[k];
        let tangent = [(pb_[0] - pa[0]) / len, (pb_[1] - pa[1]) / len];
        let m = iface.macro_of(k);
        let (s0, s1) = (iface.arclength[2 * m], iface.arclength[2 * m + 2]);
        let (lm, lm1) = (coeffs[dofs.lambda(m)], coeffs[dofs.lambda(m + 1)]);
        let slope = (lm1 - lm) / (s1 - s0);
        for (t, x, w) in segment_points(pa, pb_, INTERFACE_GAUSS_POINTS) {
            let s = iface.arclength[k] + t * len;
            let value: f64 = iface
                .hats_at(k, s)
                .iter()
                .map(|&(node, h)| h * coeffs[dofs.lambda(node)])
                .sum();
            let e = (exact.lambda)(x) - value;
            let de = dot((exact.grad_lambda)(x), tangent) - slope;
            l0 += w * e * e;
            l1 += w * de * de;
        }
    }
    let lambda_l2 = l0.sqrt();
    let lambda_h1 = (l0 + l1).sqrt();

    ErrorReport {
        h_brinkman: mesh.h_brinkman,
        h_darcy: mesh.h_darcy,
        h_interface: mesh.h_interface,
        u_brinkman: ub.sqrt(),
        u_darcy: ud.sqrt(),
        p_brinkman: pb.sqrt(),
        p_darcy: pd.sqrt(),
        lambda: interface_norm(lambda_l2, lambda_h1),
        lambda_l2,
        lambda_h1,
    }
}

/// `log(e / e_hat) / log(h / h_hat)`.
pub fn eoc_rate(e: f64, e_hat: f64, h: f64, h_hat: f64) -> Result<f64, VerificationError> {
    if h == h_hat {
        return Err(VerificationError::IdenticalH(h));
    }
    Ok((e / e_hat).ln() / (h / h_hat).ln())
}

/// Rates between consecutive levels, each with the mesh size of its region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub u_brinkman: f64,
    pub u_darcy: f64,
    pub p_brinkman: f64,
    pub p_darcy: f64,
    pub lambda: f64,
}

pub fn eoc(reports: &[ErrorReport]) -> Result<Vec<Rates>, VerificationError> {
    if reports.len() < 2 {
        return Err(VerificationError::TooFewLevels);
    }
    reports
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            Ok(Rates {
                u_brinkman: eoc_rate(a.u_brinkman, b.u_brinkman, a.h_brinkman, b.h_brinkman)?,
                u_darcy: eoc_rate(a.u_darcy, b.u_darcy, a.h_darcy, b.h_darcy)?,
                p_brinkman: eoc_rate(a.p_brinkman, b.p_brinkman, a.h_brinkman, b.h_brinkman)?,
                p_darcy: eoc_rate(a.p_darcy, b.p_darcy, a.h_darcy, b.h_darcy)?,
                lambda: eoc_rate(a.lambda, b.lambda, a.h_interface, b.h_interface)?,
            })
        })
        .collect()
}

/// Discrete conservation properties of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralReport {
    /// `|int p_h|` over the whole domain.
    pub pressure_mean: f64,
    /// `max_xi |<u_B.n - u_D.n, xi>|` over the multiplier basis.
    pub interface_residual: f64,
    /// `max_T |div u_D,h - P_D g_D|` over Darcy triangles.
    pub darcy_divergence: f64,
}

pub fn structural_invariants(
    mesh: &Mesh,
    dofs: &DofMap,
    coeffs: &[f64],
    data: &ProblemData,
) -> StructuralReport {
    let pressure_mean: f64 = (0..mesh.num_triangles())
        .map(|t| mesh.area(t) * coeffs[dofs.pressure(t)])
        .sum();

    let rule = quad_rule(1).expect("centroid rule");
    let b = assemble_b(mesh, dofs, &rule);
    let mut rows = vec![0.0; dofs.total];
    for k in 0..b.len() {
        rows[b.rows[k]] += b.vals[k] * coeffs[b.cols[k]];
    }
    let interface_residual = (0..dofs.num_lambda())
        .map(|m| rows[dofs.lambda(m)].abs())
        .fold(0.0, f64::max);

    let source_rule = quad_rule(SOURCE_DEGREE).expect("source rule");
    let projected =
        crate::elements::project_p0(mesh, Region::Darcy, &source_rule, |x| (data.g_darcy)(x));
    let rt_coeffs = &coeffs[dofs.ud_offset..];
    let darcy_divergence = mesh
        .triangles_in(Region::Darcy)
        .map(|t| {
            let centre = TriangleGeometry::of(mesh, t).centroid();
            let (_, div) = dofs.rt.eval(mesh, rt_coeffs, t, centre);
            (div - projected[t]).abs()
        })
        .fold(0.0, f64::max);

    StructuralReport {
        pressure_mean: pressure_mean.abs(),
        interface_residual,
        darcy_divergence,
    }
}

/// Largest `|u_h . n|` on the interface, from both sides: the Brinkman trace at
/// Gauss points of every interface edge and the constant Darcy normal flux density.
pub fn interface_normal_speed(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64]) -> f64 {
    let iface = &dofs.interface;
    let n = iface.normal;
    let mut speed = 0.0f64;
    for (k, &e) in iface.edges.iter().enumerate() {
        let (tb, _) = iface.sides[k];
        let geom = TriangleGeometry::of(mesh, tb);
        let [a, b] = iface.edge_points[k];
        for (_, x, _) in segment_points(mesh.vertices[a], mesh.vertices[b], INTERFACE_GAUSS_POINTS)
        {
            let (v, _) = dofs.br.eval(mesh, coeffs, tb, geom.barycentric(x));
            speed = speed.max(dot(v, n).abs());
        }
        speed = speed.max((coeffs[dofs.ud_offset + dofs.rt.flux(e)] / mesh.edge_length(e)).abs());
    }
    speed
}

/// Gauss points per edge when checking interpolant fluxes.
const FLUX_CHECK_POINTS: usize = 12;

/// Worst violations of the interpolation identities for one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationReport {
    /// `max_e |int_e (v - Pi_B v) . n|` over Brinkman edges.
    pub br_edge_flux: f64,
    /// `max_e |int_e (v - Pi_D v) . n|` over Darcy edges.
    pub rt_edge_flux: f64,
    /// `max_T |P_B div Pi_B v - P_B div v|`.
    pub br_divergence: f64,
    /// `max_T |div Pi_D v - P_D div v|`.
    pub rt_divergence: f64,
}

impl InterpolationReport {
    pub fn max(&self) -> f64 {
        self.br_edge_flux
            .max(self.rt_edge_flux)
            .max(self.br_divergence)
            .max(self.rt_divergence)
    }
}

/// Subdivisions per triangle side in `refined_mean`.
const REFINED_SPLITS: usize = 4;

/// Mean of `f` over a triangle, integrating on a uniform subdivision.
fn refined_mean(geom: &TriangleGeometry, rule: &QuadratureRule, f: impl Fn(Point) -> f64) -> f64 {
    let n = REFINED_SPLITS;
    let at = |i: usize, j: usize| {
        geom.point([
            (n - i - j) as f64 / n as f64,
            i as f64 / n as f64,
            j as f64 / n as f64,
        ])
    };
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n - i {
            let mut subs = vec![[at(i, j), at(i + 1, j), at(i, j + 1)]];
            if i + j + 1 < n {
                subs.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
            for pts in subs {
                let sub = TriangleGeometry::new(pts);
                sum += sub.quadrature(rule).map(|(_, x, w)| w * f(x)).sum::<f64>();
            }
        }
    }
    sum / geom.area
}

/// Interpolates `v` into both velocity spaces and measures the edge-flux and
/// divergence identities against `div_v`, with quadrature independent of the
/// one used by the interpolants.
pub fn interpolation_defects(
    mesh: &Mesh,
    v: impl Fn(Point) -> Vec2,
    div_v: impl Fn(Point) -> f64,
) -> InterpolationReport {
    let rule = quad_rule(10).expect("degree 10 rule");
    let edge_defect = |geom: &TriangleGeometry, k: usize, n: Vec2, vh: &dyn Fn(Point) -> Vec2| {
        let (a, b) = (geom.points[(k + 1) % 3], geom.points[(k + 2) % 3]);
        segment_points(a, b, FLUX_CHECK_POINTS)
            .iter()
            .map(|&(_, x, w)| {
                let (e, h) = (v(x), vh(x));
                w * dot([e[0] - h[0], e[1] - h[1]], n)
            })
            .sum::<f64>()
            .abs()
    };

    let br = BrSpace::new(mesh);
    let cb = interpolate_br(mesh, &br, &v);
    let (mut br_edge_flux, mut br_divergence) = (0.0f64, 0.0f64);
    for t in mesh.triangles_in(Region::Brinkman) {
        let el = BrElement::of(mesh, t);
        let geom = el.geom;
        let vh = |x: Point| br.eval(mesh, &cb, t, geom.barycentric(x)).0;
        for k in 0..3 {
            br_edge_flux = br_edge_flux.max(edge_defect(&geom, k, el.normals[k], &vh));
        }
        let mean_div: f64 = geom
            .quadrature(&rule)
            .map(|(l, _, w)| {
                let g = br.eval(mesh, &cb, t, l).1;
                w * (g[0][0] + g[1][1])
            })
            .sum::<f64>()
            / geom.area;
        br_divergence = br_divergence.max((mean_div - refined_mean(&geom, &rule, &div_v)).abs());
    }

    let rt = RtSpace::new(mesh);
    let cd = interpolate_rt0(mesh, &rt, &v);
    let (mut rt_edge_flux, mut rt_divergence) = (0.0f64, 0.0f64);
    for t in mesh.triangles_in(Region::Darcy) {
        let el = RtElement::of(mesh, t);
        let vh = |x: Point| rt.eval(mesh, &cd, t, x).0;
        for k in 0..3 {
            rt_edge_flux = rt_edge_flux.max(edge_defect(&el.geom, k, el.normal(k), &vh));
        }
        let d = rt.eval(mesh, &cd, t, el.geom.centroid()).1;
        rt_divergence = rt_divergence.max((d - refined_mean(&el.geom, &rule, &div_v)).abs());
    }
    InterpolationReport {
        br_edge_flux,
        rt_edge_flux,
        br_divergence,
        rt_divergence,
    }
}

/// Finite-difference consistency of the derivative of `a`: for each step size,
/// `|(a(u + eps v) - a(u)) / eps - Da(u) v|`.
pub fn derivative_consistency(
    mesh: &Mesh,
    dofs: &DofMap,
    params: &PhysicalParams,
    u: &[f64],
    v: &[f64],
    steps: &[f64],
    rule: &QuadratureRule,
) -> Vec<f64> {
    let dav = assemble_da(mesh, dofs, params, u, rule).to_csc().mul_vec(v);
    let a0 = assemble_a_nonlinear(mesh, dofs, params, u, rule);
    steps
        .iter()
        .map(|&eps| {
            let shifted: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + eps * b).collect();
            let a1 = assemble_a_nonlinear(mesh, dofs, params, &shifted, rule);
            a1.iter()
                .zip(&a0)
                .zip(&dav)
                .map(|((p, q), d)| ((p - q) / eps - d).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn forchheimer_flux(a: Vec2, exponent: f64) -> Vec2 {
    let s = norm(a).powf(exponent - 2.0);
    [s * a[0], s * a[1]]
}

/// Worst cases of the pointwise inequalities of the map `a -> |a|^{p-2} a` for one exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseReport {
    pub exponent: f64,
    pub samples: usize,
    /// Smallest `(g(a) - g(b)) . (a - b)`.
    pub min_monotonicity: f64,
    /// Largest `|g(a) - g(b)| - (|a| + |b|)^{p-2} |a - b|`.
    pub max_continuity_excess: f64,
    /// Largest asymmetry `|Dg(a)[u] . v - Dg(a)[v] . u|` from central differences.
    pub max_derivative_asymmetry: f64,
}

impl PointwiseReport {
    pub fn passed(&self) -> bool {
        self.min_monotonicity >= 0.0
            && self.max_continuity_excess <= 1e-14
            && self.max_derivative_asymmetry <= 1e-6
    }
}

fn unit_ball(rng: &mut ChaCha8Rng) -> Vec2 {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if norm(v) <= 1.0 {
            return v;
        }
    }
}

pub fn pointwise_property_suite(exponent: f64, samples: usize, seed: u64) -> PointwiseReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PointwiseReport {
        exponent,
        samples,
        min_monotonicity: f64::INFINITY,
        max_continuity_excess: f64::NEG_INFINITY,
        max_derivative_asymmetry: 0.0,
    };
    let eps = 1e-6;
    for _ in 0..samples {
        let (a, b) = (unit_ball(&mut rng), unit_ball(&mut rng));
        let (ga, gb) = (forchheimer_flux(a, exponent), forchheimer_flux(b, exponent));
        let dg = [ga[0] - gb[0], ga[1] - gb[1]];
        let d = [a[0] - b[0], a[1] - b[1]];
        report.min_monotonicity = report.min_monotonicity.min(dot(dg, d));
        let bound = (norm(a) + norm(b)).powf(exponent - 2.0) * norm(d);
        report.max_continuity_excess = report.max_continuity_excess.max(norm(dg) - bound);

        let (u, v) = (unit_ball(&mut rng), unit_ball(&mut rng));
        let directional = |dir: Vec2| {
            let plus = forchheimer_flux([a[0] + eps * dir[0], a[1] + eps * dir[1]], exponent);
            let minus = forchheimer_flux([a[0] - eps * dir[0], a[1] - eps * dir[1]], exponent);
            [
                (plus[0] - minus[0]) / (2.0 * eps),
                (plus[1] - minus[1]) / (2.0 * eps),
            ]
        };
        let asym = (dot(directional(u), v) - dot(directional(v), u)).abs();
        report.max_derivative_asymmetry = report.max_derivative_asymmetry.max(asym);
    }
    report
}
