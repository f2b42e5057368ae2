//! Conforming triangulations of two subdomains stacked along a straight interface.
//!
//! A [`Mesh`] carries one global vertex set shared by both subdomains, so the
//! Brinkman and Darcy triangulations match on the interface by construction.
//! Edges get a global orientation: the edge normal points out of the
//! lower-numbered incident triangle (boundary edges: outward), and every
//! triangle stores a `+1`/`-1` sign per local edge relative to that normal.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("interface edge count must be even (got {0})")]
    OddInterface(usize),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("negative area in triangle {0}")]
    NegativeArea(usize),
    #[error("non-matching interface: {0}")]
    NonMatchingInterface(String),
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("malformed mesh file, line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Subdomain a triangle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Brinkman-Forchheimer region.
    Brinkman,
    /// Darcy region.
    Darcy,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Brinkman => "B",
            Region::Darcy => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    BrinkmanLeft,
    BrinkmanTop,
    BrinkmanRight,
    DarcyLeft,
    DarcyBottom,
    DarcyRight,
    Interface,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 7] = [
        BoundaryTag::BrinkmanLeft,
        BoundaryTag::BrinkmanTop,
        BoundaryTag::BrinkmanRight,
        BoundaryTag::DarcyLeft,
        BoundaryTag::DarcyBottom,
        BoundaryTag::DarcyRight,
        BoundaryTag::Interface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::BrinkmanLeft => "GB_LEFT",
            BoundaryTag::BrinkmanTop => "GB_TOP",
            BoundaryTag::BrinkmanRight => "GB_RIGHT",
            BoundaryTag::DarcyLeft => "GD_LEFT",
            BoundaryTag::DarcyBottom => "GD_BOTTOM",
            BoundaryTag::DarcyRight => "GD_RIGHT",
            BoundaryTag::Interface => "SIGMA",
        }
    }

    /// Region whose outer boundary carries this tag; `None` for the interface.
    pub fn region(self) -> Option<Region> {
        match self {
            BoundaryTag::BrinkmanLeft | BoundaryTag::BrinkmanTop | BoundaryTag::BrinkmanRight => {
                Some(Region::Brinkman)
            }
            BoundaryTag::DarcyLeft | BoundaryTag::DarcyBottom | BoundaryTag::DarcyRight => {
                Some(Region::Darcy)
            }
            BoundaryTag::Interface => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown boundary tag `{s}`"))
    }
}

/// Triangulation pattern of each rectangular cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pattern {
    /// Two triangles per cell, split along the lower-left to upper-right diagonal.
    #[default]
    RightDiagonal,
    /// Four triangles per cell meeting at the cell centre.
    Crisscross,
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "right" | "right_diagonal" | "right-diagonal" => Ok(Pattern::RightDiagonal),
            "crisscross" => Ok(Pattern::Crisscross),
            _ => Err(format!("unknown mesh pattern `{s}`")),
        }
    }
}

/// Two axis-aligned rectangles sharing the horizontal segment
/// `[x_min, x_max] x {y_interface}`; the Brinkman rectangle sits on top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackedGeometry {
    pub x_min: f64,
    pub x_max: f64,
    pub y_bottom: f64,
    pub y_interface: f64,
    pub y_top: f64,
}

impl StackedGeometry {
    /// `(-0.5, 0.5) x (0.5, 1.5)` on top of `(-0.5, 0.5)^2`.
    pub fn unit_squares() -> Self {
        StackedGeometry {
            x_min: -0.5,
            x_max: 0.5,
            y_bottom: -0.5,
            y_interface: 0.5,
            y_top: 1.5,
        }
    }

    /// `(0, 2) x (0, 1)` on top of `(0, 2) x (-1, 0)`.
    pub fn channel() -> Self {
        StackedGeometry {
            x_min: 0.0,
            x_max: 2.0,
            y_bottom: -1.0,
            y_interface: 0.0,
            y_top: 1.0,
        }
    }

    pub fn brinkman_area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_top - self.y_interface)
    }

    pub fn darcy_area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_interface - self.y_bottom)
    }
}

/// A mesh edge with its incident triangles. `tris[0]` is the lower-numbered
/// triangle and owns the orientation of the edge normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub tris: [Option<usize>; 2],
    pub tag: Option<BoundaryTag>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Tagged boundary and interface edges as given at construction.
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    pub edges: Vec<Edge>,
    /// Local edge `i` of a triangle is opposite its local vertex `i`.
    pub tri_edges: Vec<[usize; 3]>,
    pub tri_edge_signs: Vec<[f64; 3]>,
    pub h_brinkman: f64,
    pub h_darcy: f64,
    pub h_interface: f64,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds the edge structure and validates every mesh invariant.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Mesh, MeshError> {
        if triangles.len() != regions.len() {
            return Err(MeshError::NonConforming(
                "one region tag per triangle required".into(),
            ));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshError::NonConforming(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::NegativeArea(t));
            }
        }

        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = edge_key(a, b);
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        tris: [None, None],
                        tag: None,
                    });
                    edges.len() - 1
                });
                let slot = &mut edges[e].tris;
                if slot[0].is_none() {
                    slot[0] = Some(t);
                } else if slot[1].is_none() {
                    slot[1] = Some(t);
                } else {
                    return Err(MeshError::NonConforming(format!(
                        "edge ({a}, {b}) is shared by more than two triangles"
                    )));
                }
                tri_edges[t][i] = e;
            }
        }

        for &([a, b], tag) in &boundary_edges {
            let Some(&e) = index.get(&edge_key(a, b)) else {
                return Err(if tag == BoundaryTag::Interface {
                    MeshError::NonMatchingInterface(format!(
                        "interface edge ({a}, {b}) is not a mesh edge"
                    ))
                } else {
                    MeshError::NonConforming(format!("boundary edge ({a}, {b}) is not a mesh edge"))
                });
            };
            if edges[e].tag.is_some() {
                return Err(MeshError::NonConforming(format!(
                    "edge ({a}, {b}) tagged twice"
                )));
            }
            edges[e].tag = Some(tag);
        }

        for edge in &edges {
            let [a, b] = edge.vertices;
            match (edge.tris, edge.tag) {
                ([Some(t0), Some(t1)], Some(BoundaryTag::Interface)) => {
                    if regions[t0] == regions[t1] {
                        return Err(MeshError::NonMatchingInterface(format!(
                            "interface edge ({a}, {b}) lies inside a single region"
                        )));
                    }
                }
                ([Some(t0), Some(t1)], None) => {
                    if regions[t0] != regions[t1] {
                        return Err(MeshError::NonMatchingInterface(format!(
                            "edge ({a}, {b}) separates the regions but is not tagged SIGMA"
                        )));
                    }
                }
                ([Some(_), Some(_)], Some(tag)) => {
                    return Err(MeshError::NonConforming(format!(
                        "interior edge ({a}, {b}) carries boundary tag {tag}"
                    )));
                }
                ([Some(_), None], Some(BoundaryTag::Interface)) => {
                    return Err(MeshError::NonMatchingInterface(format!(
                        "interface edge ({a}, {b}) has a triangle on one side only"
                    )));
                }
                ([Some(t0), None], Some(tag)) => {
                    if tag.region() != Some(regions[t0]) {
                        return Err(MeshError::NonConforming(format!(
                            "boundary edge ({a}, {b}) tagged {tag} belongs to region {}",
                            regions[t0].as_str()
                        )));
                    }
                }
                ([Some(_), None], None) => {
                    return Err(MeshError::NonConforming(format!(
                        "boundary edge ({a}, {b}) has no tag"
                    )));
                }
                _ => unreachable!("every edge has at least one triangle"),
            }
        }

        // Normal of an edge points out of tris[0]; tris[0] < tris[1] by construction.
        let mut tri_edge_signs = vec![[0.0; 3]; triangles.len()];
        for (t, signs) in tri_edge_signs.iter_mut().enumerate() {
            for i in 0..3 {
                signs[i] = if edges[tri_edges[t][i]].tris[0] == Some(t) {
                    1.0
                } else {
                    -1.0
                };
            }
        }

        let mut h_brinkman: f64 = 0.0;
        let mut h_darcy: f64 = 0.0;
        let mut h_interface: f64 = 0.0;
        for edge in &edges {
            let len = dist(vertices[edge.vertices[0]], vertices[edge.vertices[1]]);
            for t in edge.tris.iter().flatten() {
                match regions[*t] {
                    Region::Brinkman => h_brinkman = h_brinkman.max(len),
                    Region::Darcy => h_darcy = h_darcy.max(len),
                }
            }
            if edge.tag == Some(BoundaryTag::Interface) {
                h_interface = h_interface.max(len);
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            regions,
            boundary_edges,
            edges,
            tri_edges,
            tri_edge_signs,
            h_brinkman,
            h_darcy,
            h_interface,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn tri_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_points(t);
        signed_area(a, b, c)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    /// Unit normal of edge `e` in its global orientation.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let edge = &self.edges[e];
        let t = edge.tris[0].expect("edge without triangle");
        let local = self.tri_edges[t].iter().position(|&x| x == e).unwrap();
        let tri = self.triangles[t];
        let a = self.vertices[tri[(local + 1) % 3]];
        let b = self.vertices[tri[(local + 2) % 3]];
        let len = dist(a, b);
        // Counterclockwise triangle: the outward normal of edge a->b is the tangent rotated clockwise.
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    pub fn triangles_in(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        (0..self.triangles.len()).filter(move |&t| self.regions[t] == region)
    }

    pub fn region_area(&self, region: Region) -> f64 {
        self.triangles_in(region).map(|t| self.area(t)).sum()
    }

    /// Edges carrying `tag`.
    pub fn tagged_edges(&self, tag: BoundaryTag) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&e| self.edges[e].tag == Some(tag))
    }

    pub fn interface_edge_count(&self) -> usize {
        self.tagged_edges(BoundaryTag::Interface).count()
    }
}

/// Structured triangulation of two stacked rectangles.
///
/// `nx` cells along the interface, `ny_brinkman` and `ny_darcy` cells vertically in
/// each rectangle. Brinkman triangles are numbered first, which makes every
/// interface edge normal point from the Brinkman side into the Darcy side.
pub fn generate_stacked_rect(
    geometry: &StackedGeometry,
    nx: usize,
    ny_brinkman: usize,
    ny_darcy: usize,
    pattern: Pattern,
) -> Result<Mesh, MeshError> {
    let g = geometry;
    if !(g.x_max > g.x_min && g.y_top > g.y_interface && g.y_interface > g.y_bottom) {
        return Err(MeshError::Degenerate(format!(
            "rectangles with zero or negative extent: {g:?}"
        )));
    }
    if nx < 2 || !nx.is_multiple_of(2) {
        return Err(MeshError::OddInterface(nx));
    }
    if ny_brinkman == 0 || ny_darcy == 0 {
        return Err(MeshError::Degenerate(
            "vertical subdivision count must be positive".into(),
        ));
    }

    // Lattice rows from the bottom of the Darcy rectangle to the top of the Brinkman one.
    let ny = ny_darcy + ny_brinkman;
    let row_y = |j: usize| -> f64 {
        if j <= ny_darcy {
            g.y_bottom + (g.y_interface - g.y_bottom) * j as f64 / ny_darcy as f64
        } else {
            g.y_interface + (g.y_top - g.y_interface) * (j - ny_darcy) as f64 / ny_brinkman as f64
        }
    };
    let col_x = |i: usize| g.x_min + (g.x_max - g.x_min) * i as f64 / nx as f64;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([col_x(i), row_y(j)]);
        }
    }
    // Snap the interface row and the outer rows exactly.
    for i in 0..=nx {
        vertices[ny_darcy * (nx + 1) + i][1] = g.y_interface;
        vertices[i][1] = g.y_bottom;
        vertices[ny * (nx + 1) + i][1] = g.y_top;
    }
    let lattice = |i: usize, j: usize| j * (nx + 1) + i;

    let mut centres = HashMap::new();
    if pattern == Pattern::Crisscross {
        for j in 0..ny {
            for i in 0..nx {
                centres.insert((i, j), vertices.len());
                vertices.push([
                    0.5 * (col_x(i) + col_x(i + 1)),
                    0.5 * (row_y(j) + row_y(j + 1)),
                ]);
            }
        }
    }

    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let rows_brinkman = ny_darcy..ny;
    let rows_darcy = 0..ny_darcy;
    for (region, rows) in [
        (Region::Brinkman, rows_brinkman),
        (Region::Darcy, rows_darcy),
    ] {
        for j in rows {
            for i in 0..nx {
                let v00 = lattice(i, j);
                let v10 = lattice(i + 1, j);
                let v11 = lattice(i + 1, j + 1);
                let v01 = lattice(i, j + 1);
                match pattern {
                    Pattern::RightDiagonal => {
                        triangles.push([v00, v10, v11]);
                        triangles.push([v00, v11, v01]);
                    }
                    Pattern::Crisscross => {
                        let c = centres[&(i, j)];
                        triangles.push([v00, v10, c]);
                        triangles.push([v10, v11, c]);
                        triangles.push([v11, v01, c]);
                        triangles.push([v01, v00, c]);
                    }
                }
                let per_cell = if pattern == Pattern::RightDiagonal {
                    2
                } else {
                    4
                };
                regions.extend(std::iter::repeat_n(region, per_cell));
            }
        }
    }

    let mut boundary_edges = Vec::new();
    for i in 0..nx {
        boundary_edges.push(([lattice(i, 0), lattice(i + 1, 0)], BoundaryTag::DarcyBottom));
        boundary_edges.push((
            [lattice(i, ny_darcy), lattice(i + 1, ny_darcy)],
            BoundaryTag::Interface,
        ));
        boundary_edges.push((
            [lattice(i, ny), lattice(i + 1, ny)],
            BoundaryTag::BrinkmanTop,
        ));
    }
    for j in 0..ny {
        let (left, right) = if j < ny_darcy {
            (BoundaryTag::DarcyLeft, BoundaryTag::DarcyRight)
        } else {
            (BoundaryTag::BrinkmanLeft, BoundaryTag::BrinkmanRight)
        };
        boundary_edges.push(([lattice(0, j), lattice(0, j + 1)], left));
        boundary_edges.push(([lattice(nx, j), lattice(nx, j + 1)], right));
    }

    Mesh::new(vertices, triangles, regions, boundary_edges)
}

/// The interface partition and its pairing into macro-edges.
#[derive(Debug, Clone)]
pub struct InterfaceData {
    /// Interface edges ordered along the interface, starting from the end with smaller `x`.
    pub edges: Vec<usize>,
    /// For each ordered edge: the Brinkman and Darcy triangles on either side.
    pub sides: Vec<(usize, usize)>,
    /// Endpoints of each ordered edge, in traversal order.
    pub edge_points: Vec<[usize; 2]>,
    /// Consecutive disjoint pairs of positions in `edges`.
    pub macro_edges: Vec<[usize; 2]>,
    /// Vertex ids of the multiplier nodes (macro-edge endpoints), in order.
    pub nodes: Vec<usize>,
    /// Arclength coordinate of every vertex along the interface, in traversal order
    /// (`edges.len() + 1` entries).
    pub arclength: Vec<f64>,
    /// Unit normal on the interface pointing out of the Brinkman region.
    pub normal: [f64; 2],
}

impl InterfaceData {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Macro-edge containing the `k`-th ordered interface edge.
    pub fn macro_of(&self, k: usize) -> usize {
        k / 2
    }

    /// Values of the two multiplier hats of the macro-edge holding ordered edge `k`
    /// at arclength `s`. Returns `[(node, value); 2]`.
    pub fn hats_at(&self, k: usize, s: f64) -> [(usize, f64); 2] {
        let m = self.macro_of(k);
        let s0 = self.arclength[2 * m];
        let s1 = self.arclength[2 * m + 2];
        let t = (s - s0) / (s1 - s0);
        [(m, 1.0 - t), (m + 1, t)]
    }
}

/// Orders the interface edges and pairs them into macro-edges.
pub fn build_interface(mesh: &Mesh) -> Result<InterfaceData, MeshError> {
    let sigma: Vec<usize> = mesh.tagged_edges(BoundaryTag::Interface).collect();
    if sigma.is_empty() {
        return Err(MeshError::NonMatchingInterface(
            "mesh has no interface edges".into(),
        ));
    }
    if !sigma.len().is_multiple_of(2) {
        return Err(MeshError::OddInterface(sigma.len()));
    }

    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for &e in &sigma {
        for v in mesh.edges[e].vertices {
            incident.entry(v).or_default().push(e);
        }
    }
    let ends: Vec<usize> = {
        let mut ends: Vec<usize> = incident
            .iter()
            .filter(|(_, es)| es.len() == 1)
            .map(|(&v, _)| v)
            .collect();
        ends.sort_by(|&a, &b| {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            pa[0].total_cmp(&pb[0]).then(pa[1].total_cmp(&pb[1]))
        });
        ends
    };
    if ends.len() != 2 || incident.values().any(|es| es.len() > 2) {
        return Err(MeshError::NonMatchingInterface(
            "interface is not a simple open curve".into(),
        ));
    }

    let mut edges = Vec::with_capacity(sigma.len());
    let mut edge_points = Vec::with_capacity(sigma.len());
    let mut arclength = vec![0.0];
    let mut current = ends[0];
    let mut previous_edge = usize::MAX;
    while edges.len() < sigma.len() {
        let next = incident[&current]
            .iter()
            .copied()
            .find(|&e| e != previous_edge);
        let Some(e) = next else {
            return Err(MeshError::NonMatchingInterface(
                "interface chain is broken".into(),
            ));
        };
        let [a, b] = mesh.edges[e].vertices;
        let other = if a == current { b } else { a };
        edges.push(e);
        edge_points.push([current, other]);
        arclength.push(arclength.last().unwrap() + mesh.edge_length(e));
        previous_edge = e;
        current = other;
    }
    if current != ends[1] {
        return Err(MeshError::NonMatchingInterface(
            "interface chain is broken".into(),
        ));
    }

    let sides = edges
        .iter()
        .map(|&e| {
            let [t0, t1] = mesh.edges[e].tris;
            let (t0, t1) = (t0.unwrap(), t1.unwrap());
            if mesh.regions[t0] == Region::Brinkman {
                (t0, t1)
            } else {
                (t1, t0)
            }
        })
        .collect::<Vec<_>>();

    let macro_edges: Vec<[usize; 2]> = (0..edges.len() / 2).map(|m| [2 * m, 2 * m + 1]).collect();
    let mut nodes: Vec<usize> = macro_edges
        .iter()
        .map(|&[k, _]| edge_points[k][0])
        .collect();
    nodes.push(*edge_points.last().map(|[_, b]| b).unwrap());

    // Outward normal of the Brinkman triangle adjacent to the first interface edge.
    let e0 = edges[0];
    let n = mesh.edge_normal(e0);
    let normal = if mesh.edges[e0].tris[0] == Some(sides[0].0) {
        n
    } else {
        [-n[0], -n[1]]
    };

    Ok(InterfaceData {
        edges,
        sides,
        edge_points,
        macro_edges,
        nodes,
        arclength,
        normal,
    })
}

/// First line of the ASCII mesh format.
pub const MESH_HEADER: &str = "bfdarcy-mesh v1";

/// Serialises a mesh: header, `NV NT NE`, vertex lines `x y`, triangle lines
/// `i j k tag` and tagged edge lines `i j tag`, all indices 0-based.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str(MESH_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "{} {} {}\n",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    ));
    for v in &mesh.vertices {
        out.push_str(&format!("{} {}\n", v[0], v[1]));
    }
    for (t, r) in mesh.triangles.iter().zip(&mesh.regions) {
        out.push_str(&format!("{} {} {} {}\n", t[0], t[1], t[2], r.as_str()));
    }
    for ([a, b], tag) in &mesh.boundary_edges {
        out.push_str(&format!("{a} {b} {tag}\n"));
    }
    out
}

fn parse_fields<T: FromStr>(line: usize, fields: &[&str]) -> Result<Vec<T>, MeshError> {
    fields
        .iter()
        .map(|f| {
            f.parse().map_err(|_| MeshError::Malformed {
                line,
                msg: format!("cannot parse `{f}`"),
            })
        })
        .collect()
}

/// Parses the format written by [`write_mesh`] and validates the result.
pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| MeshError::Malformed {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    };
    let (line, header) = next("header")?;
    if header != MESH_HEADER {
        return Err(MeshError::Malformed {
            line,
            msg: format!("expected header `{MESH_HEADER}`"),
        });
    }
    let (line, counts) = next("counts")?;
    let counts: Vec<usize> = parse_fields(line, &counts.split_whitespace().collect::<Vec<_>>())?;
    let [nv, nt, ne] = counts[..] else {
        return Err(MeshError::Malformed {
            line,
            msg: "expected `NV NT NE`".into(),
        });
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = next("vertex")?;
        let xy: Vec<f64> = parse_fields(line, &l.split_whitespace().collect::<Vec<_>>())?;
        let [x, y] = xy[..] else {
            return Err(MeshError::Malformed {
                line,
                msg: "expected `x y`".into(),
            });
        };
        vertices.push([x, y]);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut regions = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, l) = next("triangle")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            return Err(MeshError::Malformed {
                line,
                msg: "expected `i j k tag`".into(),
            });
        }
        let ids: Vec<usize> = parse_fields(line, &f[..3])?;
        triangles.push([ids[0], ids[1], ids[2]]);
        regions.push(match f[3] {
            "B" => Region::Brinkman,
            "D" => Region::Darcy,
            other => {
                return Err(MeshError::Malformed {
                    line,
                    msg: format!("unknown region tag `{other}`"),
                })
            }
        });
    }
    let mut boundary_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, l) = next("boundary edge")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(MeshError::Malformed {
                line,
                msg: "expected `i j tag`".into(),
            });
        }
        let ids: Vec<usize> = parse_fields(line, &f[..2])?;
        let tag = f[2]
            .parse()
            .map_err(|msg| MeshError::Malformed { line, msg })?;
        boundary_edges.push(([ids[0], ids[1]], tag));
    }
    if let Some((line, _)) = lines.next() {
        return Err(MeshError::Malformed {
            line,
            msg: "trailing content".into(),
        });
    }
    Mesh::new(vertices, triangles, regions, boundary_edges)
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    fs::write(path, write_mesh(mesh)).map_err(|e| MeshError::Io(format!("{}: {e}", path.display())))
}

pub fn load_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text =
        fs::read_to_string(path).map_err(|e| MeshError::Io(format!("{}: {e}", path.display())))?;
    read_mesh(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_legal_mesh() {
        let m = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            2,
            1,
            1,
            Pattern::RightDiagonal,
        )
        .unwrap();
        assert_eq!(m.triangles_in(Region::Brinkman).count(), 4);
        assert_eq!(m.triangles_in(Region::Darcy).count(), 4);
        assert_eq!(m.interface_edge_count(), 2);
        let iface = build_interface(&m).unwrap();
        assert_eq!(iface.macro_edges.len(), 1);
        let xs: Vec<f64> = iface.nodes.iter().map(|&v| m.vertices[v][0]).collect();
        assert_eq!(xs, vec![-0.5, 0.5]);
    }

    #[test]
    fn odd_interface_is_rejected() {
        let err = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            3,
            3,
            3,
            Pattern::RightDiagonal,
        )
        .unwrap_err();
        assert!(err
            .to_string()
            .contains("interface edge count must be even"));
    }

    #[test]
    fn degenerate_rectangle_is_rejected() {
        let mut g = StackedGeometry::unit_squares();
        g.y_top = g.y_interface;
        assert!(matches!(
            generate_stacked_rect(&g, 2, 1, 1, Pattern::RightDiagonal),
            Err(MeshError::Degenerate(_))
        ));
    }

    #[test]
    fn interface_mesh_size_is_uniform() {
        let m = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            4,
            4,
            4,
            Pattern::RightDiagonal,
        )
        .unwrap();
        assert_eq!(m.h_interface, 0.25);
        assert!((m.h_brinkman - 0.25 * 2f64.sqrt()).abs() < 1e-15);
        let fine = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            8,
            8,
            8,
            Pattern::RightDiagonal,
        )
        .unwrap();
        assert_eq!(fine.h_interface, 0.5 * m.h_interface);
    }

    #[test]
    fn four_edges_give_two_macro_edges() {
        let m = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            4,
            2,
            2,
            Pattern::Crisscross,
        )
        .unwrap();
        let iface = build_interface(&m).unwrap();
        assert_eq!(iface.macro_edges.len(), 2);
        let xs: Vec<f64> = iface.nodes.iter().map(|&v| m.vertices[v][0]).collect();
        assert_eq!(xs, vec![-0.5, 0.0, 0.5]);
        let edge_x: Vec<f64> = iface
            .edge_points
            .iter()
            .map(|p| m.vertices[p[0]][0])
            .collect();
        assert_eq!(edge_x, vec![-0.5, -0.25, 0.0, 0.25]);
        assert_eq!(iface.normal, [0.0, -1.0]);
    }

    #[test]
    fn sixty_four_interface_edges() {
        let m = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            64,
            2,
            2,
            Pattern::RightDiagonal,
        )
        .unwrap();
        let iface = build_interface(&m).unwrap();
        assert_eq!(iface.macro_edges.len(), 32);
        assert_eq!(iface.num_nodes(), 33);
    }

    #[test]
    fn areas_and_interface_vertices() {
        for pattern in [Pattern::RightDiagonal, Pattern::Crisscross] {
            let g = StackedGeometry::channel();
            let m = generate_stacked_rect(&g, 6, 3, 5, pattern).unwrap();
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            assert!(rel(m.region_area(Region::Brinkman), g.brinkman_area()) < 1e-12);
            assert!(rel(m.region_area(Region::Darcy), g.darcy_area()) < 1e-12);
            let iface = build_interface(&m).unwrap();
            for &[a, b] in &iface.edge_points {
                for v in [a, b] {
                    let touches =
                        |r: Region| m.triangles_in(r).any(|t| m.triangles[t].contains(&v));
                    assert!(touches(Region::Brinkman) && touches(Region::Darcy));
                }
            }
            for edge in &m.edges {
                match edge.tag {
                    None | Some(BoundaryTag::Interface) => assert!(edge.tris[1].is_some()),
                    Some(_) => assert!(edge.tris[1].is_none()),
                }
            }
        }
    }

    #[test]
    fn orientation_signs_are_opposite_on_interior_edges() {
        let m = generate_stacked_rect(
            &StackedGeometry::unit_squares(),
            4,
            2,
            2,
            Pattern::Crisscross,
        )
        .unwrap();
        for (e, edge) in m.edges.iter().enumerate() {
            let sign = |t: usize| {
                let i = m.tri_edges[t].iter().position(|&x| x == e).unwrap();
                m.tri_edge_signs[t][i]
            };
            assert_eq!(sign(edge.tris[0].unwrap()), 1.0);
            if let Some(t1) = edge.tris[1] {
                assert_eq!(sign(t1), -1.0);
                assert!(edge.tris[0].unwrap() < t1);
            }
        }
    }
}
