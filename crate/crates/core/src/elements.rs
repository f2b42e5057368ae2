//! Bernardi-Raugel and lowest-order Raviart-Thomas elements, their global
//! numberings, and the interpolation operators onto them.
//!
//! BR basis on a triangle (9 functions): local index `2 i + c` is the P1 hat of
//! vertex `i` times the unit vector `e_c`; local index `6 + k` is the edge bubble
//! `(6 / |e_k|) eta_j eta_l n_k` of the edge opposite vertex `k`, with `n_k` the
//! *global* edge normal. The bubble is scaled to carry unit flux through its edge.
//! The basis is hierarchical: its dual functionals are the vertex values and
//! the flux surplus `int_e (v - I_1 v) . n` over each edge, where `I_1` is
//! the P1 nodal interpolant.
//!
//! RT0 basis on a triangle: `phi_k(x) = s_k (x - P_k) / (2 |T|)` with `s_k` the
//! orientation sign of local edge `k`; its degree of freedom is the flux
//! `int_{e_k} v . n_k` with the global normal.

use crate::mesh::{Mesh, Point, Region};
use crate::quadrature::{segment_points, QuadratureRule};

/// Number of points of the Gauss rule used on edges.
pub const EDGE_GAUSS_POINTS: usize = 8;

pub const BR_LOCAL: usize = 9;
pub const RT_LOCAL: usize = 3;

pub type Vec2 = [f64; 2];
/// `grad[r][s] = d v_r / d x_s`.
pub type Mat2 = [[f64; 2]; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[inline]
pub fn frobenius(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub points: [Point; 3],
    pub area: f64,
    pub grad_bary: [Vec2; 3],
    pub edge_len: [f64; 3],
    /// Outward unit normal of local edge `k` (opposite vertex `k`).
    pub outward: [Vec2; 3],
}

impl TriangleGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        let mut grad_bary = [[0.0; 2]; 3];
        let mut edge_len = [0.0; 3];
        let mut outward = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = points[(i + 1) % 3];
            let b = points[(i + 2) % 3];
            grad_bary[i] = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
            edge_len[i] = (b[0] - a[0]).hypot(b[1] - a[1]);
            outward[i] = [(b[1] - a[1]) / edge_len[i], -(b[0] - a[0]) / edge_len[i]];
        }
        TriangleGeometry {
            points,
            area,
            grad_bary,
            edge_len,
            outward,
        }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(mesh.tri_points(t))
    }

    pub fn point(&self, bary: [f64; 3]) -> Point {
        let p = &self.points;
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let mut l = [0.0; 3];
        for (i, li) in l.iter_mut().enumerate() {
            let p = self.points[(i + 1) % 3];
            *li = dot(self.grad_bary[i], [x[0] - p[0], x[1] - p[1]]);
        }
        l
    }

    /// Quadrature points mapped to the triangle: `(barycentric, point, weight)`,
    /// weights already scaled by the Jacobian.
    pub fn quadrature<'a>(
        &'a self,
        rule: &'a QuadratureRule,
    ) -> impl Iterator<Item = ([f64; 3], Point, f64)> + 'a {
        rule.barycentric()
            .map(move |(l, w)| (l, self.point(l), 2.0 * self.area * w))
    }

    pub fn centroid(&self) -> Point {
        self.point([1.0 / 3.0; 3])
    }
}

/// Values and gradients of the 9 BR basis functions at one point.
#[derive(Debug, Clone, Copy)]
pub struct BrBasis {
    pub values: [Vec2; BR_LOCAL],
    pub grads: [Mat2; BR_LOCAL],
}

impl BrBasis {
    pub fn div(&self, i: usize) -> f64 {
        self.grads[i][0][0] + self.grads[i][1][1]
    }
}

/// Bernardi-Raugel element on one triangle.
#[derive(Debug, Clone, Copy)]
pub struct BrElement {
    pub geom: TriangleGeometry,
    /// Global unit normal of each local edge.
    pub normals: [Vec2; 3],
}

impl BrElement {
    pub fn new(geom: TriangleGeometry, signs: [f64; 3]) -> Self {
        let normals =
            std::array::from_fn(|k| [signs[k] * geom.outward[k][0], signs[k] * geom.outward[k][1]]);
        BrElement { geom, normals }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(TriangleGeometry::of(mesh, t), mesh.tri_edge_signs[t])
    }

    pub fn eval(&self, l: [f64; 3]) -> BrBasis {
        let g = &self.geom.grad_bary;
        let mut values = [[0.0; 2]; BR_LOCAL];
        let mut grads = [[[0.0; 2]; 2]; BR_LOCAL];
        for i in 0..3 {
            for c in 0..2 {
                values[2 * i + c][c] = l[i];
                grads[2 * i + c][c] = g[i];
            }
        }
        for k in 0..3 {
            let (j, m) = ((k + 1) % 3, (k + 2) % 3);
            let s = 6.0 / self.geom.edge_len[k];
            let n = self.normals[k];
            let bubble = s * l[j] * l[m];
            let db = [
                s * (l[j] * g[m][0] + l[m] * g[j][0]),
                s * (l[j] * g[m][1] + l[m] * g[j][1]),
            ];
            values[6 + k] = [bubble * n[0], bubble * n[1]];
            grads[6 + k] = [[n[0] * db[0], n[0] * db[1]], [n[1] * db[0], n[1] * db[1]]];
        }
        BrBasis { values, grads }
    }

    /// The hierarchical DOF functionals applied to `v`: vertex values, then the
    /// flux surplus of each local edge.
    pub fn dofs(&self, v: impl Fn(Point) -> Vec2) -> [f64; BR_LOCAL] {
        let mut out = [0.0; BR_LOCAL];
        let vals: [Vec2; 3] = std::array::from_fn(|i| v(self.geom.points[i]));
        for i in 0..3 {
            out[2 * i] = vals[i][0];
            out[2 * i + 1] = vals[i][1];
        }
        for k in 0..3 {
            let (j, m) = ((k + 1) % 3, (k + 2) % 3);
            let n = self.normals[k];
            let a = self.geom.points[j];
            let b = self.geom.points[m];
            let flux: f64 = segment_points(a, b, EDGE_GAUSS_POINTS)
                .iter()
                .map(|&(_, x, w)| w * dot(v(x), n))
                .sum();
            let p1_flux = 0.5 * self.geom.edge_len[k] * (dot(vals[j], n) + dot(vals[m], n));
            out[6 + k] = flux - p1_flux;
        }
        out
    }
}

/// Lowest-order Raviart-Thomas element on one triangle.
#[derive(Debug, Clone, Copy)]
pub struct RtElement {
    pub geom: TriangleGeometry,
    pub signs: [f64; 3],
}

impl RtElement {
    pub fn new(geom: TriangleGeometry, signs: [f64; 3]) -> Self {
        RtElement { geom, signs }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(TriangleGeometry::of(mesh, t), mesh.tri_edge_signs[t])
    }

    pub fn values(&self, x: Point) -> [Vec2; RT_LOCAL] {
        std::array::from_fn(|k| {
            let p = self.geom.points[k];
            let c = self.signs[k] / (2.0 * self.geom.area);
            [c * (x[0] - p[0]), c * (x[1] - p[1])]
        })
    }

    pub fn divs(&self) -> [f64; RT_LOCAL] {
        std::array::from_fn(|k| self.signs[k] / self.geom.area)
    }

    /// Global normal of local edge `k`.
    pub fn normal(&self, k: usize) -> Vec2 {
        let n = self.geom.outward[k];
        [self.signs[k] * n[0], self.signs[k] * n[1]]
    }

    /// Edge fluxes `int_{e_k} v . n_k` with the global normals.
    pub fn dofs(&self, v: impl Fn(Point) -> Vec2) -> [f64; RT_LOCAL] {
        std::array::from_fn(|k| {
            let a = self.geom.points[(k + 1) % 3];
            let b = self.geom.points[(k + 2) % 3];
            let n = self.normal(k);
            segment_points(a, b, EDGE_GAUSS_POINTS)
                .iter()
                .map(|&(_, x, w)| w * dot(v(x), n))
                .sum()
        })
    }
}

/// Global numbering of the Bernardi-Raugel space on the Brinkman region:
/// two components per vertex, then one bubble per edge.
#[derive(Debug, Clone)]
pub struct BrSpace {
    pub vertex_dof: Vec<Option<usize>>,
    pub vertices: Vec<usize>,
    pub edge_dof: Vec<Option<usize>>,
    pub edges: Vec<usize>,
}

impl BrSpace {
    pub fn new(mesh: &Mesh) -> Self {
        let mut vertex_dof = vec![None; mesh.num_vertices()];
        let mut vertices = Vec::new();
        let mut edge_dof = vec![None; mesh.edges.len()];
        let mut edges = Vec::new();
        for t in mesh.triangles_in(Region::Brinkman) {
            for &v in &mesh.triangles[t] {
                if vertex_dof[v].is_none() {
                    vertex_dof[v] = Some(vertices.len());
                    vertices.push(v);
                }
            }
            for &e in &mesh.tri_edges[t] {
                if edge_dof[e].is_none() {
                    edge_dof[e] = Some(edges.len());
                    edges.push(e);
                }
            }
        }
        BrSpace {
            vertex_dof,
            vertices,
            edge_dof,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        2 * self.vertices.len() + self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertex_component(&self, v: usize, c: usize) -> usize {
        2 * self.vertex_dof[v].expect("vertex outside the Brinkman region") + c
    }

    pub fn bubble(&self, e: usize) -> usize {
        2 * self.vertices.len() + self.edge_dof[e].expect("edge outside the Brinkman region")
    }

    pub fn local_dofs(&self, mesh: &Mesh, t: usize) -> [usize; BR_LOCAL] {
        let tri = mesh.triangles[t];
        let edges = mesh.tri_edges[t];
        std::array::from_fn(|i| {
            if i < 6 {
                self.vertex_component(tri[i / 2], i % 2)
            } else {
                self.bubble(edges[i - 6])
            }
        })
    }

    /// Value and gradient of the field with coefficients `coeffs` at barycentric `l` in `t`.
    pub fn eval(&self, mesh: &Mesh, coeffs: &[f64], t: usize, l: [f64; 3]) -> (Vec2, Mat2) {
        let el = BrElement::of(mesh, t);
        let basis = el.eval(l);
        let dofs = self.local_dofs(mesh, t);
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for i in 0..BR_LOCAL {
            let c = coeffs[dofs[i]];
            for r in 0..2 {
                v[r] += c * basis.values[i][r];
                for s in 0..2 {
                    g[r][s] += c * basis.grads[i][r][s];
                }
            }
        }
        (v, g)
    }
}

/// Global numbering of RT0 on the Darcy region: one flux per edge.
#[derive(Debug, Clone)]
pub struct RtSpace {
    pub edge_dof: Vec<Option<usize>>,
    pub edges: Vec<usize>,
}

impl RtSpace {
    pub fn new(mesh: &Mesh) -> Self {
        let mut edge_dof = vec![None; mesh.edges.len()];
        let mut edges = Vec::new();
        for t in mesh.triangles_in(Region::Darcy) {
            for &e in &mesh.tri_edges[t] {
                if edge_dof[e].is_none() {
                    edge_dof[e] = Some(edges.len());
                    edges.push(e);
                }
            }
        }
        RtSpace { edge_dof, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn flux(&self, e: usize) -> usize {
        self.edge_dof[e].expect("edge outside the Darcy region")
    }

    pub fn local_dofs(&self, mesh: &Mesh, t: usize) -> [usize; RT_LOCAL] {
        std::array::from_fn(|k| self.flux(mesh.tri_edges[t][k]))
    }

    /// Value and divergence of the field at point `x` of triangle `t`.
    pub fn eval(&self, mesh: &Mesh, coeffs: &[f64], t: usize, x: Point) -> (Vec2, f64) {
        let el = RtElement::of(mesh, t);
        let vals = el.values(x);
        let divs = el.divs();
        let dofs = self.local_dofs(mesh, t);
        let mut v = [0.0; 2];
        let mut d = 0.0;
        for k in 0..RT_LOCAL {
            let c = coeffs[dofs[k]];
            v[0] += c * vals[k][0];
            v[1] += c * vals[k][1];
            d += c * divs[k];
        }
        (v, d)
    }
}

/// Bernardi-Raugel interpolant of `v` on the Brinkman region.
pub fn interpolate_br(mesh: &Mesh, space: &BrSpace, v: impl Fn(Point) -> Vec2) -> Vec<f64> {
    let mut out = vec![0.0; space.len()];
    for t in mesh.triangles_in(Region::Brinkman) {
        let dofs = BrElement::of(mesh, t).dofs(&v);
        for (g, d) in space.local_dofs(mesh, t).into_iter().zip(dofs) {
            out[g] = d;
        }
    }
    out
}

/// Raviart-Thomas interpolant of `v` on the Darcy region.
pub fn interpolate_rt0(mesh: &Mesh, space: &RtSpace, v: impl Fn(Point) -> Vec2) -> Vec<f64> {
    let mut out = vec![0.0; space.len()];
    for t in mesh.triangles_in(Region::Darcy) {
        let dofs = RtElement::of(mesh, t).dofs(&v);
        for (g, d) in space.local_dofs(mesh, t).into_iter().zip(dofs) {
            out[g] = d;
        }
    }
    out
}

/// L2 projection onto piecewise constants: one entry per mesh triangle, with
/// triangles outside `region` left at zero.
pub fn project_p0(
    mesh: &Mesh,
    region: Region,
    rule: &QuadratureRule,
    f: impl Fn(Point) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_triangles()];
    for t in mesh.triangles_in(region) {
        let geom = TriangleGeometry::of(mesh, t);
        let integral: f64 = geom.quadrature(rule).map(|(_, x, w)| w * f(x)).sum();
        out[t] = integral / geom.area;
    }
    out
}
