use bfdarcy::assembly::{
    assemble_newton_system, AssemblyOptions, DofMap, PhysicalParams, ProblemData,
};
use bfdarcy::elements::{interpolate_br, interpolate_rt0, BrSpace, RtSpace, TriangleGeometry};
use bfdarcy::mesh::{
    generate_stacked_rect, read_mesh, write_mesh, BoundaryTag, Mesh, Pattern, Region,
    StackedGeometry,
};
use bfdarcy::sparse::{relative_residual, sparse_lu_solve, TripletMatrix};
use bfdarcy::verification::{interpolation_defects, pointwise_property_suite};
use proptest::prelude::*;

fn pattern() -> impl Strategy<Value = Pattern> {
    prop_oneof![Just(Pattern::RightDiagonal), Just(Pattern::Crisscross)]
}

/// Even `nx` so the interface pairs into macro edges.
fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    (1usize..5, 1usize..5, 1usize..5, pattern(), any::<bool>()).prop_map(
        |(half, ny_b, ny_d, pattern, channel)| {
            let g = if channel {
                StackedGeometry::channel()
            } else {
                StackedGeometry::unit_squares()
            };
            generate_stacked_rect(&g, 2 * half, ny_b, ny_d, pattern).unwrap()
        },
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_meshes_are_consistent(m in mesh_strategy()) {
        let (nv, ne, nt) = (m.num_vertices() as i64, m.edges.len() as i64, m.num_triangles() as i64);
        prop_assert_eq!(nv - ne + nt, 1);
        let total: f64 = (0..m.num_triangles()).map(|t| m.area(t)).sum();
        let by_region = m.region_area(Region::Brinkman) + m.region_area(Region::Darcy);
        prop_assert!((total - by_region).abs() < 1e-12);
        prop_assert!((0..m.num_triangles()).all(|t| m.area(t) > 0.0));
        for e in &m.edges {
            // Exactly the boundary and interface edges are tagged.
            let outer = e.tris[1].is_none();
            prop_assert_eq!(outer || e.tag == Some(BoundaryTag::Interface), e.tag.is_some());
        }
        prop_assert_eq!(m.interface_edge_count() % 2, 0);
    }

    #[test]
    fn mesh_text_round_trip(m in mesh_strategy()) {
        let back = read_mesh(&write_mesh(&m)).unwrap();
        prop_assert_eq!(&back.vertices, &m.vertices);
        prop_assert_eq!(&back.triangles, &m.triangles);
        prop_assert_eq!(&back.regions, &m.regions);
        prop_assert_eq!(&back.edges, &m.edges);
    }

    #[test]
    fn interpolants_reproduce_affine_fields(
        m in mesh_strategy(),
        c in prop::array::uniform6(-2.0f64..2.0),
        s in prop::array::uniform3(0.05f64..0.9),
    ) {
        let v = |x: [f64; 2]| [c[0] + c[1] * x[0] + c[2] * x[1], c[3] + c[4] * x[0] + c[5] * x[1]];
        let br = BrSpace::new(&m);
        let cb = interpolate_br(&m, &br, v);
        for t in m.triangles_in(Region::Brinkman) {
            let l = [s[0], s[1], s[2]];
            let sum: f64 = l.iter().sum();
            let l = l.map(|x| x / sum);
            let x = TriangleGeometry::of(&m, t).point(l);
            let (vh, _) = br.eval(&m, &cb, t, l);
            prop_assert!((vh[0] - v(x)[0]).abs() < 1e-11 && (vh[1] - v(x)[1]).abs() < 1e-11);
        }
        // RT0 holds constants plus multiples of the position.
        let w = |x: [f64; 2]| [c[0] + c[1] * x[0], c[3] + c[1] * x[1]];
        let rt = RtSpace::new(&m);
        let cd = interpolate_rt0(&m, &rt, w);
        for t in m.triangles_in(Region::Darcy) {
            let x = TriangleGeometry::of(&m, t).centroid();
            let (vh, d) = rt.eval(&m, &cd, t, x);
            prop_assert!((vh[0] - w(x)[0]).abs() < 1e-11 && (vh[1] - w(x)[1]).abs() < 1e-11);
            prop_assert!((d - 2.0 * c[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_identities(m in mesh_strategy(), k in prop::array::uniform4(-3.0f64..3.0)) {
        let v = |x: [f64; 2]| [(k[0] * x[0] + k[1] * x[1]).sin(), (k[2] * x[0] - k[3] * x[1]).cos()];
        let div = |x: [f64; 2]| k[0] * (k[0] * x[0] + k[1] * x[1]).cos() + k[3] * (k[2] * x[0] - k[3] * x[1]).sin();
        let r = interpolation_defects(&m, v, div);
        prop_assert!(r.max() < 1e-10, "{:?}", r);
    }

    #[test]
    fn newton_matrix_is_symmetric(
        m in mesh_strategy(),
        p in 3.0f64..=4.0,
        f in 0.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let data = ProblemData::homogeneous();
        let dofs = DofMap::new(&m, &data).unwrap();
        let params = PhysicalParams::new(1.0, f, p, 1.0, 0.1);
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let c: Vec<f64> = (0..dofs.total).map(|_| next()).collect();
        let a = assemble_newton_system(&m, &dofs, &params, &data, &c, &AssemblyOptions::default()).matrix.to_csc();
        prop_assert!(a.asymmetry() <= 1e-12 * a.norm_inf().max(1.0), "asymmetry {}", a.asymmetry());
        let x: Vec<f64> = (0..dofs.total).map(|_| next()).collect();
        let y: Vec<f64> = (0..dofs.total).map(|_| next()).collect();
        let (xay, yax) = (dot(&x, &a.mul_vec(&y)), dot(&y, &a.mul_vec(&x)));
        prop_assert!((xay - yax).abs() <= 1e-10 * (1.0 + xay.abs()));
    }

    #[test]
    fn pointwise_inequalities(p in 3.0f64..=4.0, seed in any::<u64>()) {
        let r = pointwise_property_suite(p, 500, seed);
        prop_assert!(r.passed(), "{:?}", r);
    }

    #[test]
    fn sparse_lu_solves_saddle_systems(
        n in 5usize..40,
        m_frac in 0.1f64..0.5,
        seed in any::<u64>(),
    ) {
        let m = ((n as f64 * m_frac) as usize).max(1);
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        // [A B^T; B 0] with A symmetric positive definite and B of full row rank.
        let mut t = TripletMatrix::new(n + m, n + m);
        for i in 0..n {
            t.push(i, i, 4.0 + next());
            if i + 1 < n {
                let v = next();
                t.push(i, i + 1, v);
                t.push(i + 1, i, v);
            }
        }
        for r in 0..m {
            let cols = [r % n, (r + 1 + (next().abs() * n as f64) as usize) % n];
            t.push(n + r, r, 1.0);
            t.push(r, n + r, 1.0);
            for &c in &cols[1..] {
                if c != r {
                    let v = next();
                    t.push(n + r, c, v);
                    t.push(c, n + r, v);
                }
            }
        }
        let a = t.to_csc();
        let b: Vec<f64> = (0..n + m).map(|_| next()).collect();
        let x = sparse_lu_solve(&a, &b).unwrap();
        prop_assert!(relative_residual(&a, &x, &b) <= 1e-10);
    }
}
