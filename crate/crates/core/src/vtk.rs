//! Legacy ASCII VTK output of a discrete solution.

use std::fmt::Write;

use crate::assembly::DofMap;
use crate::elements::TriangleGeometry;
use crate::mesh::{Mesh, Region};

/// Unstructured grid of the whole domain.
///
/// `u_B` is point data (vertex values; zero at vertices outside the Brinkman
/// region), `u_D` is cell data (the RT0 field at the centroid, which is its
/// element mean), and the pressure and region index are cell data.
pub fn domain_vtk(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64]) -> String {
    let mut s = String::new();
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    s.push_str("# vtk DataFile Version 3.0\nbfdarcy solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {nv} double").unwrap();
    for v in &mesh.vertices {
        writeln!(s, "{} {} 0", v[0], v[1]).unwrap();
    }
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }

    let mut ub = vec![[0.0; 2]; nv];
    for &v in &dofs.br.vertices {
        ub[v] = [
            coeffs[dofs.br.vertex_component(v, 0)],
            coeffs[dofs.br.vertex_component(v, 1)],
        ];
    }
    writeln!(s, "POINT_DATA {nv}\nVECTORS u_brinkman double").unwrap();
    for u in &ub {
        writeln!(s, "{} {} 0", u[0], u[1]).unwrap();
    }

    let rt = &coeffs[dofs.ud_offset..];
    writeln!(s, "CELL_DATA {nt}\nVECTORS u_darcy double").unwrap();
    for t in 0..nt {
        let u = match mesh.regions[t] {
            Region::Darcy => {
                dofs.rt
                    .eval(mesh, rt, t, TriangleGeometry::of(mesh, t).centroid())
                    .0
            }
            Region::Brinkman => [0.0; 2],
        };
        writeln!(s, "{} {} 0", u[0], u[1]).unwrap();
    }
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for t in 0..nt {
        writeln!(s, "{}", coeffs[dofs.pressure(t)]).unwrap();
    }
    s.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for r in &mesh.regions {
        writeln!(s, "{}", matches!(r, Region::Darcy) as u8).unwrap();
    }
    s
}

/// The multiplier as a polyline through the interface vertices.
pub fn interface_vtk(mesh: &Mesh, dofs: &DofMap, coeffs: &[f64]) -> String {
    let iface = &dofs.interface;
    let n = iface.edges.len() + 1;
    let mut s = String::new();
    s.push_str(
        "# vtk DataFile Version 3.0\nbfdarcy interface multiplier\nASCII\nDATASET POLYDATA\n",
    );
    writeln!(s, "POINTS {n} double").unwrap();
    let mut points = Vec::with_capacity(n);
    points.push(iface.edge_points[0][0]);
    points.extend(iface.edge_points.iter().map(|p| p[1]));
    for &v in &points {
        let x = mesh.vertices[v];
        writeln!(s, "{} {} 0", x[0], x[1]).unwrap();
    }
    writeln!(s, "LINES 1 {}", n + 1).unwrap();
    s.push_str(&n.to_string());
    for i in 0..n {
        write!(s, " {i}").unwrap();
    }
    s.push('\n');
    writeln!(
        s,
        "POINT_DATA {n}\nSCALARS lambda double 1\nLOOKUP_TABLE default"
    )
    .unwrap();
    for (i, arc) in iface.arclength.iter().enumerate() {
        // Vertex i closes edge i - 1 and opens edge i.
        let k = i.min(iface.edges.len() - 1);
        let value: f64 = iface
            .hats_at(k, *arc)
            .iter()
            .map(|&(m, h)| h * coeffs[dofs.lambda(m)])
            .sum();
        writeln!(s, "{value}").unwrap();
    }
    s
}
