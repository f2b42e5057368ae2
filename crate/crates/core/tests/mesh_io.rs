use bfdarcy::mesh::{
    generate_stacked_rect, load_mesh, read_mesh, save_mesh, write_mesh, BoundaryTag, MeshError,
    Pattern, Region, StackedGeometry,
};

fn sample(pattern: Pattern) -> bfdarcy::mesh::Mesh {
    generate_stacked_rect(&StackedGeometry::unit_squares(), 4, 3, 2, pattern).unwrap()
}

#[test]
fn save_then_load_is_identity() {
    for pattern in [Pattern::RightDiagonal, Pattern::Crisscross] {
        let m = sample(pattern);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mesh");
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.regions, m.regions);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        assert_eq!(back.h_interface, m.h_interface);
    }
}

#[test]
fn header_and_counts() {
    let text = write_mesh(&sample(Pattern::RightDiagonal));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bfdarcy-mesh v1"));
    let counts: Vec<usize> = lines
        .next()
        .unwrap()
        .split(' ')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(counts[0], 5 * 6);
    assert_eq!(counts[1], 2 * 4 * 5);
}

#[test]
fn clockwise_triangle_is_negative_area() {
    let mut m = sample(Pattern::RightDiagonal);
    m.triangles[3].swap(1, 2);
    let err = read_mesh(&write_mesh(&m)).unwrap_err();
    assert_eq!(err, MeshError::NegativeArea(3));
    assert!(err.to_string().contains("negative area"));
}

#[test]
fn shifted_interface_vertices_do_not_match() {
    let m = sample(Pattern::RightDiagonal);
    let mut vertices = m.vertices.clone();
    let mut triangles = m.triangles.clone();
    let y = StackedGeometry::unit_squares().y_interface;
    let mut copy = std::collections::HashMap::new();
    for (t, tri) in triangles.iter_mut().enumerate() {
        if m.regions[t] != Region::Darcy {
            continue;
        }
        for v in tri.iter_mut() {
            let p = m.vertices[*v];
            if p[1] == y && p[0] > -0.5 && p[0] < 0.5 {
                *v = *copy.entry(*v).or_insert_with(|| {
                    vertices.push([p[0] + 1e-3, p[1]]);
                    vertices.len() - 1
                });
            }
        }
    }
    let err = bfdarcy::mesh::Mesh::new(
        vertices,
        triangles,
        m.regions.clone(),
        m.boundary_edges.clone(),
    )
    .unwrap_err();
    assert!(matches!(err, MeshError::NonMatchingInterface(_)), "{err}");
    assert!(err.to_string().contains("non-matching interface"));
}

#[test]
fn malformed_inputs_are_reported_with_line() {
    let good = write_mesh(&sample(Pattern::RightDiagonal));
    let cases = [
        good.replacen("bfdarcy-mesh v1", "mesh v0", 1),
        good.replacen("GB_TOP", "GB_UP", 1),
        good.lines().take(10).collect::<Vec<_>>().join("\n"),
        format!("{good}0 1 SIGMA\n"),
        good.replacen(" B\n", " X\n", 1),
    ];
    for text in cases {
        match read_mesh(&text) {
            Err(MeshError::Malformed { .. }) => {}
            other => panic!("expected a malformed-file error, got {other:?}"),
        }
    }
}

#[test]
fn tags_survive_round_trip() {
    let m = sample(Pattern::Crisscross);
    let back = read_mesh(&write_mesh(&m)).unwrap();
    for tag in BoundaryTag::ALL {
        assert_eq!(back.tagged_edges(tag).count(), m.tagged_edges(tag).count());
    }
}
