//! Deterministic built-in test meshes.
//!
//! Every generator is a pure function of its arguments, so fixtures used by
//! tests and the validation suite are reproducible without any files.

use std::collections::BTreeMap;

use nalgebra::Point3;

use crate::error::Result;
use crate::mesh::TriangleMesh;

/// Unit-radius icosphere produced by `level` rounds of 4-way subdivision of a
/// regular icosahedron, with every vertex projected to the unit sphere.
/// Vertex count is `10·4^level + 2`.
pub fn icosphere(level: usize) -> Result<TriangleMesh> {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| {
        let p = nalgebra::Vector3::new(x, y, z).normalize();
        Point3::from(p)
    })
    .collect();

    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoint_cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint_cache.entry(key).or_insert_with(|| {
                let mid = (vertices[a].coords + vertices[b].coords) * 0.5;
                vertices.push(Point3::from(mid.normalize()));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }

    TriangleMesh::new(vertices, faces)
}

/// Flat rectangular strip in the z = 0 plane, `[0, length] × [0, width]`,
/// triangulated on an `nx × ny` grid with consistent +z orientation.
pub fn flat_strip(nx: usize, ny: usize, length: f64, width: f64) -> Result<TriangleMesh> {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point3::new(
                length * i as f64 / nx as f64,
                width * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Unit square split along one diagonal into two right triangles.
pub fn two_triangle_square() -> Result<TriangleMesh> {
    TriangleMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Two unit equilateral triangles sharing an edge (a rhombus).
pub fn equilateral_pair() -> Result<TriangleMesh> {
    let h = 3.0_f64.sqrt() / 2.0;
    TriangleMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.5, h, 0.0),
            Point3::new(0.5, -h, 0.0),
        ],
        vec![[0, 1, 2], [1, 0, 3]],
    )
}

/// Regular tetrahedron with unit circumradius, outward orientation.
pub fn regular_tetrahedron() -> Result<TriangleMesh> {
    let s = 1.0 / 3.0_f64.sqrt();
    TriangleMesh::new(
        vec![
            Point3::new(s, s, s),
            Point3::new(s, -s, -s),
            Point3::new(-s, s, -s),
            Point3::new(-s, -s, s),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Open cylinder (no caps) of the given radius and height, axis along z,
/// `n_around × n_axial` quads split into triangles, outward orientation. Both
/// rims are boundary loops.
pub fn open_cylinder(
    n_around: usize,
    n_axial: usize,
    radius: f64,
    height: f64,
) -> Result<TriangleMesh> {
    let mut vertices = Vec::with_capacity(n_around * (n_axial + 1));
    for j in 0..=n_axial {
        let z = height * j as f64 / n_axial as f64;
        for i in 0..n_around {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n_around as f64;
            vertices.push(Point3::new(radius * theta.cos(), radius * theta.sin(), z));
        }
    }
    let at = |i: usize, j: usize| j * n_around + (i % n_around);
    let mut faces = Vec::with_capacity(2 * n_around * n_axial);
    for j in 0..n_axial {
        for i in 0..n_around {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces)
}
