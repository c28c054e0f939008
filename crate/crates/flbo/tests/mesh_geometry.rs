//! Mesh ingestion and differential geometry: connectivity invariants, exact
//! areas and angles on closed-form shapes, piecewise-linear gradients,
//! curvature frames, file-format round-trips, and rejection of broken input.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use approx::assert_relative_eq;
use flbo::mesh::{
    edge_opposite_angles, estimate_curvature_frames, hat_gradient, load_mesh, parse_obj,
    parse_off, write_off, MeshFormat, TriangleMesh,
};
use flbo::shapes::{
    equilateral_pair, flat_strip, icosphere, open_cylinder, regular_tetrahedron,
    two_triangle_square,
};
use flbo::FlboError;
use nalgebra::{Point3, Vector3};

#[test]
fn connectivity_counts_and_euler_characteristic() {
    let square = two_triangle_square().unwrap();
    assert_eq!(
        (square.n_vertices(), square.n_faces(), square.n_edges()),
        (4, 2, 5)
    );
    assert_eq!(square.boundary_edge_count(), 4);

    let tetra = regular_tetrahedron().unwrap();
    assert_eq!(
        (tetra.n_vertices(), tetra.n_faces(), tetra.n_edges()),
        (4, 4, 6)
    );
    assert_eq!(tetra.boundary_edge_count(), 0);
    // Closed genus-0 surface: V − E + F = 2.
    assert_eq!(tetra.n_vertices() + tetra.n_faces(), tetra.n_edges() + 2);

    let sphere = icosphere(2).unwrap();
    assert_eq!((sphere.n_vertices(), sphere.n_faces()), (162, 320));
    assert_eq!(sphere.boundary_edge_count(), 0);
    assert_eq!(sphere.n_vertices() + sphere.n_faces(), sphere.n_edges() + 2);

    let cylinder = open_cylinder(12, 4, 1.0, 2.0).unwrap();
    assert_eq!((cylinder.n_vertices(), cylinder.n_faces()), (60, 96));
    assert_eq!(cylinder.boundary_edge_count(), 24);
    // Annulus: V − E + F = 0.
    assert_eq!(cylinder.n_vertices() + cylinder.n_faces(), cylinder.n_edges());
}

#[test]
fn face_areas_and_normals_match_closed_forms() {
    let square = two_triangle_square().unwrap();
    for f in 0..2 {
        assert_relative_eq!(square.face_area(f), 0.5, max_relative = 1e-15);
        assert_relative_eq!(
            square.face_normal(f),
            Vector3::z(),
            max_relative = 1e-15
        );
    }
    assert_relative_eq!(square.total_area(), 1.0, max_relative = 1e-15);

    let pair = equilateral_pair().unwrap();
    for f in 0..2 {
        assert_relative_eq!(
            pair.face_area(f),
            3.0f64.sqrt() / 4.0,
            max_relative = 1e-14
        );
    }

    // Regular tetrahedron with unit circumradius has edge √(8/3) and face
    // area (√3/4)·(8/3).
    let tetra = regular_tetrahedron().unwrap();
    let face_area = 3.0f64.sqrt() / 4.0 * (8.0 / 3.0);
    for f in 0..4 {
        assert_relative_eq!(tetra.face_area(f), face_area, max_relative = 1e-14);
    }

    // Inscribed polyhedra underestimate the sphere area; level 3 is within 1%.
    let sphere = icosphere(3).unwrap();
    let exact = 4.0 * PI;
    assert!(sphere.total_area() < exact);
    assert!((sphere.total_area() - exact).abs() / exact < 0.01);

    let unit = sphere.normalized_to_unit_area().unwrap();
    assert_relative_eq!(unit.total_area(), 1.0, max_relative = 1e-12);
}

#[test]
fn opposite_angles_match_closed_forms() {
    let square = two_triangle_square().unwrap();
    let angles = edge_opposite_angles(&square);
    assert_eq!(angles.per_edge.len(), square.n_edges());

    let diagonal = square.edge_index(0, 2).unwrap();
    let info = &angles.per_edge[diagonal];
    assert_eq!(info.vertices, (0, 2));
    assert_relative_eq!(info.first.angle, FRAC_PI_2, max_relative = 1e-14);
    let second = info.second.as_ref().expect("diagonal is interior");
    assert_relative_eq!(second.angle, FRAC_PI_2, max_relative = 1e-14);

    let bottom = square.edge_index(0, 1).unwrap();
    let info = &angles.per_edge[bottom];
    assert_relative_eq!(info.first.angle, FRAC_PI_4, max_relative = 1e-14);
    assert!(info.second.is_none());

    let pair = equilateral_pair().unwrap();
    let angles = edge_opposite_angles(&pair);
    let shared = pair.edge_index(0, 1).unwrap();
    let info = &angles.per_edge[shared];
    assert_relative_eq!(info.first.angle, FRAC_PI_3, max_relative = 1e-14);
    assert_relative_eq!(
        info.second.as_ref().unwrap().angle,
        FRAC_PI_3,
        max_relative = 1e-14
    );

    // Unit vectors point from the apex to the edge endpoints.
    for info in &angles.per_edge {
        for corner in std::iter::once(&info.first).chain(info.second.as_ref()) {
            assert_relative_eq!(corner.unit_to_first.norm(), 1.0, max_relative = 1e-14);
            assert_relative_eq!(corner.unit_to_second.norm(), 1.0, max_relative = 1e-14);
            let apex = pair.vertices()[corner.apex];
            let to_first = (pair.vertices()[info.vertices.0] - apex).normalize();
            let to_second = (pair.vertices()[info.vertices.1] - apex).normalize();
            assert_relative_eq!(corner.unit_to_first, to_first, max_relative = 1e-14);
            assert_relative_eq!(corner.unit_to_second, to_second, max_relative = 1e-14);
        }
    }

    // Angles around an interior vertex of a flat mesh sum to 2π: corner
    // angles are consistent with flatness.
    let strip = flat_strip(4, 4, 1.0, 1.0).unwrap();
    let interior = 2 * 5 + 2;
    let mut sum = 0.0;
    for &f in strip.vertex_faces(interior) {
        let tri = strip.faces()[f];
        let c = tri.iter().position(|&v| v == interior).unwrap();
        let a = strip.vertices()[tri[(c + 1) % 3]] - strip.vertices()[tri[c]];
        let b = strip.vertices()[tri[(c + 2) % 3]] - strip.vertices()[tri[c]];
        sum += a.cross(&b).norm().atan2(a.dot(&b));
    }
    assert_relative_eq!(sum, 2.0 * PI, max_relative = 1e-12);
}

#[test]
fn gradients_are_exact_for_affine_fields() {
    let strip = flat_strip(6, 3, 2.0, 1.0).unwrap();
    let affine: Vec<f64> = strip
        .vertices()
        .iter()
        .map(|p| 3.0 * p.x - 2.0 * p.y + 0.7)
        .collect();
    for g in strip.face_gradient(&affine).unwrap() {
        assert_relative_eq!(g, Vector3::new(3.0, -2.0, 0.0), max_relative = 1e-12);
    }

    let constant = vec![4.25; strip.n_vertices()];
    for g in strip.face_gradient(&constant).unwrap() {
        assert!(g.norm() <= 1e-13);
    }

    // On a curved surface the PL gradient of an ambient-linear field is the
    // tangential projection of its ambient gradient, face by face.
    let sphere = icosphere(2).unwrap();
    let linear: Vec<f64> = sphere.vertices().iter().map(|p| p.x).collect();
    for (f, g) in sphere.face_gradient(&linear).unwrap().iter().enumerate() {
        let n = sphere.face_normal(f);
        let projected = Vector3::x() - n * n.x;
        assert_relative_eq!(*g, projected, epsilon = 1e-10);
    }

    let short = vec![0.0; sphere.n_vertices() - 1];
    assert!(matches!(
        sphere.face_gradient(&short),
        Err(FlboError::MalformedInput(_))
    ));
}

#[test]
fn hat_gradients_partition_unity_and_interpolate_corners() {
    let tetra = regular_tetrahedron().unwrap();
    for f in 0..tetra.n_faces() {
        let tri = tetra.faces()[f];
        let mut sum = Vector3::zeros();
        for c in 0..3 {
            let g = hat_gradient(&tetra, f, c);
            sum += g;
            // The hat is affine on the face: 1 at its own corner, 0 at the
            // others, so its gradient pairs to ±1 with corner differences.
            for other in 0..3 {
                if other == c {
                    continue;
                }
                let d = tetra.vertices()[tri[c]] - tetra.vertices()[tri[other]];
                assert_relative_eq!(g.dot(&d), 1.0, max_relative = 1e-12);
            }
        }
        assert!(sum.norm() <= 1e-13);
    }
}

#[test]
fn off_round_trip_is_bit_exact() {
    let sphere = icosphere(1).unwrap();
    let text = write_off(&sphere);
    let back = parse_off(&text).unwrap();
    assert_eq!(back.n_vertices(), sphere.n_vertices());
    assert_eq!(back.faces(), sphere.faces());
    for (a, b) in back.vertices().iter().zip(sphere.vertices()) {
        for i in 0..3 {
            assert_eq!(a.coords[i].to_bits(), b.coords[i].to_bits());
        }
    }

    let dir = std::env::temp_dir().join("flbo_mesh_geometry_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sphere.OFF");
    std::fs::write(&path, &text).unwrap();
    let format = MeshFormat::from_path(&path).unwrap();
    assert_eq!(format, MeshFormat::Off);
    let loaded = load_mesh(&path, format).unwrap();
    assert_eq!(loaded.n_faces(), sphere.n_faces());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn off_parser_handles_headers_comments_and_polygons() {
    let text = "OFF\n# a comment\n5 1 0\n0 0 0\n1 0 0 # trailing comment\n1 1 0\n0.5 1.5 0\n0 1 0\n5 0 1 2 3 4\n";
    let mesh = parse_off(text).unwrap();
    assert_eq!(mesh.n_vertices(), 5);
    // The pentagon fans around vertex 0.
    assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3], [0, 3, 4]]);

    let headerless = "3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
    assert_eq!(parse_off(headerless).unwrap().n_faces(), 1);
}

#[test]
fn obj_parser_handles_attributes_comments_and_polygons() {
    let text = "\
# quad with attributes
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vn 0 0 1
f 1/1/1 2/1/1 3/1/1 4/1/1
";
    let mesh = parse_obj(text).unwrap();
    assert_eq!(mesh.n_vertices(), 4);
    assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    assert_eq!(mesh.vertices()[2], Point3::new(1.0, 1.0, 0.0));

    let zero_index = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n";
    assert!(parse_obj(zero_index).is_err());

    let short_face = "v 0 0 0\nv 1 0 0\nf 1 2\n";
    assert!(parse_obj(short_face).is_err());
}

#[test]
fn malformed_meshes_are_rejected() {
    let v = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
    let triangle = vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)];

    let out_of_range = TriangleMesh::new(triangle.clone(), vec![[0, 1, 7]]);
    match out_of_range {
        Err(FlboError::Mesh(message)) => {
            assert!(message.contains("references vertex 7"), "message: {message}")
        }
        other => panic!("expected a mesh error, got {other:?}"),
    }

    assert!(TriangleMesh::new(triangle.clone(), vec![[0, 1, 1]]).is_err());
    assert!(TriangleMesh::new(Vec::new(), Vec::new()).is_err());

    let collinear = vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0)];
    match TriangleMesh::new(collinear, vec![[0, 1, 2]]) {
        Err(FlboError::Mesh(message)) => {
            assert!(message.contains("degenerate"), "message: {message}")
        }
        other => panic!("expected a degeneracy error, got {other:?}"),
    }

    let mut quad = triangle.clone();
    quad.push(v(1.0, 1.0, 0.0));
    // Both faces traverse edge (1, 2) in the same direction.
    match TriangleMesh::new(quad.clone(), vec![[0, 1, 2], [1, 2, 3]]) {
        Err(FlboError::Mesh(message)) => {
            assert!(message.contains("orientation"), "message: {message}")
        }
        other => panic!("expected an orientation error, got {other:?}"),
    }

    let mut fan = quad.clone();
    fan.push(v(-1.0, 1.0, 1.0));
    match TriangleMesh::new(fan, vec![[0, 1, 2], [1, 3, 2], [2, 4, 1]]) {
        Err(FlboError::Mesh(message)) => {
            assert!(message.contains("non-manifold"), "message: {message}")
        }
        other => panic!("expected a non-manifold error, got {other:?}"),
    }

    let poisoned = vec![v(0.0, 0.0, 0.0), v(f64::NAN, 0.0, 0.0), v(0.0, 1.0, 0.0)];
    assert!(TriangleMesh::new(poisoned, vec![[0, 1, 2]]).is_err());
}

#[test]
fn file_errors_keep_their_kind_and_format_errors_name_the_path() {
    let missing = std::path::Path::new("/nonexistent/mesh.off");
    match load_mesh(missing, MeshFormat::Off) {
        Err(FlboError::Io(e)) => assert_eq!(e.kind(), std::io::ErrorKind::NotFound),
        other => panic!("expected an I/O error, got {other:?}"),
    }

    let dir = std::env::temp_dir().join("flbo_mesh_format_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.off");
    std::fs::write(&path, "OFF\n3 1 0\n0 0 0\n1 0 0\n").unwrap();
    match load_mesh(&path, MeshFormat::Off) {
        Err(FlboError::Format { path: p, .. }) => assert!(p.contains("broken.off")),
        other => panic!("expected a format error, got {other:?}"),
    }
    std::fs::remove_dir_all(&dir).ok();

    assert!(matches!(
        MeshFormat::from_path(std::path::Path::new("mesh.stl")),
        Err(FlboError::Config(_))
    ));
    assert_eq!(
        MeshFormat::from_path(std::path::Path::new("MESH.OBJ")).unwrap(),
        MeshFormat::Obj
    );
}

#[test]
fn curvature_frames_are_orthonormal_and_right_handed() {
    for mesh in [
        icosphere(2).unwrap(),
        open_cylinder(16, 5, 1.0, 2.5).unwrap(),
        flat_strip(5, 3, 2.0, 1.0).unwrap(),
    ] {
        let (frames, _) = estimate_curvature_frames(&mesh);
        assert_eq!(frames.len(), mesh.n_faces());
        for (f, frame) in frames.iter().enumerate() {
            assert_relative_eq!(frame.u_max.norm(), 1.0, max_relative = 1e-12);
            assert_relative_eq!(frame.u_min.norm(), 1.0, max_relative = 1e-12);
            assert!(frame.u_max.dot(&frame.u_min).abs() <= 1e-12);
            assert!(frame.u_max.dot(&frame.normal).abs() <= 1e-12);
            assert_relative_eq!(frame.normal, mesh.face_normal(f), max_relative = 1e-12);
            assert_relative_eq!(frame.matrix().determinant(), 1.0, max_relative = 1e-10);
        }
    }
}

#[test]
fn cylinder_frames_follow_the_circumferential_direction() {
    let mesh = open_cylinder(24, 8, 1.0, 3.0).unwrap();
    let (frames, report) = estimate_curvature_frames(&mesh);
    assert!(report.underdetermined_vertices.is_empty());

    let mut boundary_vertex = vec![false; mesh.n_vertices()];
    for edge in mesh.edges() {
        if edge.is_boundary() {
            boundary_vertex[edge.vertices.0] = true;
            boundary_vertex[edge.vertices.1] = true;
        }
    }

    let mut checked = 0;
    for (f, tri) in mesh.faces().iter().enumerate() {
        if tri.iter().any(|&v| boundary_vertex[v]) {
            continue;
        }
        // Curvature is 1/r around the circumference and 0 along the axis, so
        // the maximal direction is horizontal and the minimal one is axial.
        assert!(
            frames[f].u_max.z.abs() < 0.05,
            "face {f}: u_max = {:?}",
            frames[f].u_max
        );
        assert!(
            frames[f].u_min.z.abs() > 0.999,
            "face {f}: u_min = {:?}",
            frames[f].u_min
        );
        checked += 1;
    }
    assert!(checked > 100, "only {checked} interior faces checked");
}

#[test]
fn flat_faces_fall_back_to_the_first_edge() {
    let mesh = flat_strip(6, 4, 3.0, 2.0).unwrap();
    let (frames, report) = estimate_curvature_frames(&mesh);
    assert_eq!(report.fallback_faces.len(), mesh.n_faces());
    for (f, frame) in frames.iter().enumerate() {
        let tri = mesh.faces()[f];
        let first_edge = (mesh.vertices()[tri[1]] - mesh.vertices()[tri[0]]).normalize();
        assert_relative_eq!(frame.u_max, first_edge, max_relative = 1e-12);
    }
}
