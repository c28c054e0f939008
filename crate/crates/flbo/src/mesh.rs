//! Triangle meshes and their differential-geometry quantities.
//!
//! A [`TriangleMesh`] owns indexed vertices and faces plus derived data the
//! operator assembly needs: an edge table with adjacent faces, per-face areas
//! and unit normals, and vertex adjacency. Construction validates index
//! ranges, rejects degenerate faces (area relative to the bounding-box scale),
//! rejects non-manifold edges (three or more adjacent faces), and requires
//! consistent orientation across interior edges.
//!
//! On top of the mesh sit the per-edge opposite angles and unit vectors used
//! by the cotangent-type weights, estimated principal-curvature frames, and
//! exact piecewise-linear gradients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Vector3};

use crate::error::{FlboError, Result};

/// Faces with area at or below `RELATIVE_AREA_FLOOR · diag²` are rejected;
/// the scale-relative threshold keeps the check unit-independent.
const RELATIVE_AREA_FLOOR: f64 = 1e-12;

/// An undirected mesh edge with its adjacent faces. `vertices` is ordered
/// `(min, max)`; interior edges have both face slots filled.
#[derive(Clone, Copy, Debug)]
pub struct MeshEdge {
    pub vertices: (usize, usize),
    pub face_first: usize,
    pub face_second: Option<usize>,
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.face_second.is_none()
    }
}

/// Indexed triangle mesh with derived adjacency and per-face geometry.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    edges: Vec<MeshEdge>,
    edge_lookup: BTreeMap<(usize, usize), usize>,
    face_areas: Vec<f64>,
    face_normals: Vec<Vector3<f64>>,
    vertex_faces: Vec<Vec<usize>>,
    vertex_neighbors: Vec<Vec<usize>>,
    bbox_diagonal: f64,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(FlboError::Mesh("mesh has no vertices or no faces".into()));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p.coords.iter().all(|x| x.is_finite()) {
                return Err(FlboError::Mesh(format!("vertex {i} has non-finite coordinates")));
            }
        }
        let n = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(FlboError::Mesh(format!(
                        "face {f} references vertex {v}, but the mesh has {n} vertices"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(FlboError::Mesh(format!("face {f} repeats a vertex: {tri:?}")));
            }
        }

        let (mut lo, mut hi) = (vertices[0].coords, vertices[0].coords);
        for p in &vertices {
            lo = lo.inf(&p.coords);
            hi = hi.sup(&p.coords);
        }
        let bbox_diagonal = (hi - lo).norm();
        if bbox_diagonal == 0.0 {
            return Err(FlboError::Mesh("all vertices coincide".into()));
        }

        let mut face_areas = Vec::with_capacity(faces.len());
        let mut face_normals = Vec::with_capacity(faces.len());
        let area_floor = RELATIVE_AREA_FLOOR * bbox_diagonal * bbox_diagonal;
        for (f, tri) in faces.iter().enumerate() {
            let [a, b, c] = *tri;
            let cross = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
            let area = 0.5 * cross.norm();
            if area <= area_floor {
                return Err(FlboError::Mesh(format!(
                    "face {f} is degenerate: area {area:.3e} at bounding-box diagonal {bbox_diagonal:.3e}"
                )));
            }
            face_areas.push(area);
            face_normals.push(cross / (2.0 * area));
        }

        // Undirected edge table; `forward` records whether the face traverses
        // the edge from its smaller to its larger vertex index, which is what
        // orientation consistency is checked against.
        let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, bool)>> = BTreeMap::new();
        for (f, tri) in faces.iter().enumerate() {
            for c in 0..3 {
                let a = tri[c];
                let b = tri[(c + 1) % 3];
                let key = (a.min(b), a.max(b));
                edge_map.entry(key).or_default().push((f, a < b));
            }
        }
        let mut edges = Vec::with_capacity(edge_map.len());
        let mut edge_lookup = BTreeMap::new();
        for (key, adj) in &edge_map {
            match adj.len() {
                1 => {
                    edge_lookup.insert(*key, edges.len());
                    edges.push(MeshEdge {
                        vertices: *key,
                        face_first: adj[0].0,
                        face_second: None,
                    });
                }
                2 => {
                    if adj[0].1 == adj[1].1 {
                        return Err(FlboError::Mesh(format!(
                            "edge ({}, {}) is traversed in the same direction by faces {} and {}; orientation is inconsistent",
                            key.0, key.1, adj[0].0, adj[1].0
                        )));
                    }
                    edge_lookup.insert(*key, edges.len());
                    edges.push(MeshEdge {
                        vertices: *key,
                        face_first: adj[0].0,
                        face_second: Some(adj[1].0),
                    });
                }
                more => {
                    return Err(FlboError::Mesh(format!(
                        "edge ({}, {}) is non-manifold: {more} adjacent faces",
                        key.0, key.1
                    )));
                }
            }
        }

        let mut vertex_faces = vec![Vec::new(); n];
        for (f, tri) in faces.iter().enumerate() {
            for &v in tri {
                vertex_faces[v].push(f);
            }
        }
        let mut vertex_neighbors = vec![BTreeSet::new(); n];
        for edge in &edges {
            let (a, b) = edge.vertices;
            vertex_neighbors[a].insert(b);
            vertex_neighbors[b].insert(a);
        }
        let vertex_neighbors = vertex_neighbors
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();

        Ok(Self {
            vertices,
            faces,
            edges,
            edge_lookup,
            face_areas,
            face_normals,
            vertex_faces,
            vertex_neighbors,
            bbox_diagonal,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_areas[f]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        self.face_normals[f]
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn vertex_neighbors(&self, v: usize) -> &[usize] {
        &self.vertex_neighbors[v]
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        self.bbox_diagonal
    }

    /// Vertices of `face` that are not `a` or `b` (the edge endpoints); a
    /// triangle has exactly one.
    pub fn opposite_vertex(&self, face: usize, a: usize, b: usize) -> usize {
        let tri = self.faces[face];
        for &v in &tri {
            if v != a && v != b {
                return v;
            }
        }
        unreachable!("edge endpoints must belong to the face");
    }

    /// Rebuilds the mesh with transformed vertex positions, re-validating all
    /// invariants (used for rigid-motion and scaling property checks).
    pub fn map_vertices<F: Fn(&Point3<f64>) -> Point3<f64>>(&self, f: F) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Uniformly rescales positions so the total surface area becomes 1.
    pub fn normalized_to_unit_area(&self) -> Result<Self> {
        let scale = 1.0 / self.total_area().sqrt();
        self.map_vertices(|p| Point3::from(p.coords * scale))
    }

    /// Exact gradient of the piecewise-linear interpolant of `f` on each
    /// face; the result lies in the face plane.
    pub fn face_gradient(&self, f: &[f64]) -> Result<Vec<Vector3<f64>>> {
        if f.len() != self.n_vertices() {
            return Err(FlboError::MalformedInput(format!(
                "field has {} values for {} vertices",
                f.len(),
                self.n_vertices()
            )));
        }
        let mut grads = Vec::with_capacity(self.n_faces());
        for (idx, tri) in self.faces.iter().enumerate() {
            let normal = self.face_normals[idx];
            let inv_two_area = 1.0 / (2.0 * self.face_areas[idx]);
            let mut g = Vector3::zeros();
            for c in 0..3 {
                let opposite_edge =
                    self.vertices[tri[(c + 2) % 3]] - self.vertices[tri[(c + 1) % 3]];
                g += normal.cross(&opposite_edge) * (f[tri[c]] * inv_two_area);
            }
            grads.push(g);
        }
        Ok(grads)
    }
}

/// Gradient of the hat function of corner `c` (0, 1, or 2) on `face`.
pub fn hat_gradient(mesh: &TriangleMesh, face: usize, c: usize) -> Vector3<f64> {
    let tri = mesh.faces()[face];
    let opposite_edge = mesh.vertices()[tri[(c + 2) % 3]] - mesh.vertices()[tri[(c + 1) % 3]];
    mesh.face_normal(face).cross(&opposite_edge) / (2.0 * mesh.face_area(face))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Picks the format from the file extension (`.off` / `.obj`,
    /// case-insensitive).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Ok(Self::Off),
            Some("obj") => Ok(Self::Obj),
            other => Err(FlboError::Config(format!(
                "cannot infer mesh format from extension {other:?}; expected .off or .obj"
            ))),
        }
    }
}

/// Loads a mesh from disk. Polygonal faces are fan-triangulated around their
/// first vertex, deterministically.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let text = crate::error::read_text(path)?;
    let parsed = match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    };
    parsed.map_err(|e| match e {
        FlboError::Mesh(message) | FlboError::MalformedInput(message) => FlboError::Format {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Parses the OFF format: optional `OFF` header token, then vertex/face/edge
/// counts, vertex coordinates, and index lists.
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut tokens = tokenize(text);
    if tokens.first().is_some_and(|t| t.eq_ignore_ascii_case("OFF")) {
        tokens.remove(0);
    }
    let mut cursor = 0usize;
    let mut next = |what: &str| -> Result<&str> {
        let t = tokens
            .get(cursor)
            .ok_or_else(|| FlboError::Mesh(format!("unexpected end of OFF data while reading {what}")))?;
        cursor += 1;
        Ok(t)
    };
    let nv: usize = parse_token(next("vertex count")?, "vertex count")?;
    let nf: usize = parse_token(next("face count")?, "face count")?;
    let _ne: usize = parse_token(next("edge count")?, "edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let x: f64 = parse_token(next("vertex coordinate")?, &format!("vertex {i} x"))?;
        let y: f64 = parse_token(next("vertex coordinate")?, &format!("vertex {i} y"))?;
        let z: f64 = parse_token(next("vertex coordinate")?, &format!("vertex {i} z"))?;
        vertices.push(Point3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let k: usize = parse_token(next("face valence")?, &format!("face {i} valence"))?;
        if k < 3 {
            return Err(FlboError::Mesh(format!("face {i} has only {k} vertices")));
        }
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            poly.push(parse_token::<usize>(next("face index")?, &format!("face {i} index"))?);
        }
        fan_triangulate(&poly, &mut faces);
    }
    TriangleMesh::new(vertices, faces)
}

/// Parses Wavefront OBJ, keeping only positions and faces; normals, texture
/// coordinates, and grouping directives are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for (axis, slot) in coord.iter_mut().enumerate() {
                    let t = parts.next().ok_or_else(|| {
                        FlboError::Mesh(format!("line {}: vertex needs 3 coordinates", lineno + 1))
                    })?;
                    *slot = parse_token(t, &format!("line {} axis {axis}", lineno + 1))?;
                }
                vertices.push(Point3::new(coord[0], coord[1], coord[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in parts {
                    let index_part = t.split('/').next().unwrap_or("");
                    let idx: i64 =
                        parse_token(index_part, &format!("line {} face index", lineno + 1))?;
                    if idx < 1 {
                        return Err(FlboError::Mesh(format!(
                            "line {}: face index {idx} must be positive (1-based)",
                            lineno + 1
                        )));
                    }
                    poly.push((idx - 1) as usize);
                }
                if poly.len() < 3 {
                    return Err(FlboError::Mesh(format!(
                        "line {}: face has fewer than 3 vertices",
                        lineno + 1
                    )));
                }
                fan_triangulate(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Writes OFF with shortest round-trip float formatting, so reloading
/// reproduces vertex coordinates bit-exactly.
pub fn write_off(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    out.push_str("OFF\n");
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_faces(),
        mesh.n_edges()
    );
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    for tri in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    out
}

fn tokenize(text: &str) -> Vec<&str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .collect()
}

fn parse_token<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| FlboError::Mesh(format!("cannot parse {what}: {token:?}")))
}

fn fan_triangulate(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len() - 1 {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

// ---------------------------------------------------------------------------
// Opposite angles and edge unit vectors
// ---------------------------------------------------------------------------

/// Geometry of one triangle corner opposite an edge: the apex vertex, the
/// interior angle there, and unit vectors from the apex to both edge
/// endpoints.
#[derive(Clone, Copy, Debug)]
pub struct CornerGeometry {
    pub face: usize,
    pub apex: usize,
    /// Interior angle at the apex, in (0, π).
    pub angle: f64,
    /// Unit vector apex → larger-index endpoint of the edge.
    pub unit_to_second: Vector3<f64>,
    /// Unit vector apex → smaller-index endpoint of the edge.
    pub unit_to_first: Vector3<f64>,
}

/// Per-edge opposite-angle data, aligned with [`TriangleMesh::edges`].
#[derive(Clone, Copy, Debug)]
pub struct EdgeAngleInfo {
    pub vertices: (usize, usize),
    pub first: CornerGeometry,
    pub second: Option<CornerGeometry>,
}

#[derive(Clone, Debug)]
pub struct EdgeAngles {
    pub per_edge: Vec<EdgeAngleInfo>,
}

/// For each edge and each adjacent face, the interior angle at the opposite
/// vertex and the unit vectors from it to the edge endpoints.
pub fn edge_opposite_angles(mesh: &TriangleMesh) -> EdgeAngles {
    let corner = |face: usize, (i, j): (usize, usize)| -> CornerGeometry {
        let apex = mesh.opposite_vertex(face, i, j);
        let to_first = mesh.vertices()[i] - mesh.vertices()[apex];
        let to_second = mesh.vertices()[j] - mesh.vertices()[apex];
        let angle = to_first.cross(&to_second).norm().atan2(to_first.dot(&to_second));
        CornerGeometry {
            face,
            apex,
            angle,
            unit_to_second: to_second / to_second.norm(),
            unit_to_first: to_first / to_first.norm(),
        }
    };
    let per_edge = mesh
        .edges()
        .iter()
        .map(|edge| EdgeAngleInfo {
            vertices: edge.vertices,
            first: corner(edge.face_first, edge.vertices),
            second: edge.face_second.map(|f| corner(f, edge.vertices)),
        })
        .collect();
    EdgeAngles { per_edge }
}

// ---------------------------------------------------------------------------
// Curvature frames
// ---------------------------------------------------------------------------

/// Orthonormal per-face frame `(û_M, û_m, n̂)`: the estimated direction of
/// maximal principal curvature, its in-plane orthogonal complement, and the
/// face normal. `det [û_M û_m n̂] = +1`.
#[derive(Clone, Copy, Debug)]
pub struct FaceFrame {
    pub u_max: Vector3<f64>,
    pub u_min: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl FaceFrame {
    /// Columns `(û_M, û_m, n̂)`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.u_max, self.u_min, self.normal])
    }
}

/// Which faces and vertices needed fallbacks during frame estimation.
#[derive(Clone, Debug, Default)]
pub struct FrameEstimationReport {
    /// Faces whose principal directions were ambiguous (umbilic within 1e-6
    /// relative, or no curvature information); their `û_M` is the normalized
    /// first edge.
    pub fallback_faces: Vec<usize>,
    /// Vertices whose 2-ring gave fewer than the 5 samples a quadric fit
    /// needs (their shape operator is zero).
    pub underdetermined_vertices: Vec<usize>,
}

/// Estimates per-face principal-curvature frames.
///
/// Per vertex, a quadric height function is fit over the 2-ring in the vertex
/// tangent frame and its Hessian gives a shape operator; per face, the corner
/// operators are averaged with lumped-area weights, projected to the face
/// plane, and eigendecomposed. `û_M` is the direction of largest *absolute*
/// curvature, which keeps the choice independent of normal orientation.
/// Umbilic faces (principal values within 1e-6 relative) deterministically
/// fall back to the face's first edge.
pub fn estimate_curvature_frames(
    mesh: &TriangleMesh,
) -> (Vec<FaceFrame>, FrameEstimationReport) {
    let n = mesh.n_vertices();
    let mut report = FrameEstimationReport::default();

    // Area-weighted vertex normals.
    let mut vertex_normals = vec![Vector3::zeros(); n];
    for (f, tri) in mesh.faces().iter().enumerate() {
        let weighted = mesh.face_normal(f) * mesh.face_area(f);
        for &v in tri {
            vertex_normals[v] += weighted;
        }
    }
    for (v, normal) in vertex_normals.iter_mut().enumerate() {
        let len = normal.norm();
        if len > 0.0 {
            *normal /= len;
        } else {
            *normal = mesh.face_normal(mesh.vertex_faces(v)[0]);
        }
    }

    // Lumped vertex areas, used both to weight the fit average and below to
    // blend corner shape operators into faces.
    let mut vertex_areas = vec![0.0f64; n];
    for (f, tri) in mesh.faces().iter().enumerate() {
        for &v in tri {
            vertex_areas[v] += mesh.face_area(f) / 3.0;
        }
    }

    // Per-vertex shape operators from a quadric fit over the 2-ring.
    let mut shape_ops = vec![Matrix3::zeros(); n];
    for v in 0..n {
        let normal = vertex_normals[v];
        let (t1, t2) = tangent_basis(&normal);
        let mut ring = BTreeSet::new();
        for &a in mesh.vertex_neighbors(v) {
            ring.insert(a);
            for &b in mesh.vertex_neighbors(a) {
                if b != v {
                    ring.insert(b);
                }
            }
        }
        if ring.len() < 5 {
            report.underdetermined_vertices.push(v);
            continue;
        }
        let origin = mesh.vertices()[v];
        let mut rows = DMatrix::zeros(ring.len(), 5);
        let mut rhs = DVector::zeros(ring.len());
        for (r, &p) in ring.iter().enumerate() {
            let d = mesh.vertices()[p] - origin;
            let (x, y, z) = (d.dot(&t1), d.dot(&t2), d.dot(&normal));
            rows[(r, 0)] = 0.5 * x * x;
            rows[(r, 1)] = x * y;
            rows[(r, 2)] = 0.5 * y * y;
            rows[(r, 3)] = x;
            rows[(r, 4)] = y;
            rhs[r] = z;
        }
        let svd = rows.svd(true, true);
        let max_sv = svd.singular_values.max();
        if !(max_sv > 0.0) || svd.singular_values.min() < 1e-10 * max_sv {
            report.underdetermined_vertices.push(v);
            continue;
        }
        let coeffs = match svd.solve(&rhs, 0.0) {
            Ok(c) => c,
            Err(_) => {
                report.underdetermined_vertices.push(v);
                continue;
            }
        };
        let (a, b, c) = (coeffs[0], coeffs[1], coeffs[2]);
        shape_ops[v] = t1 * t1.transpose() * a
            + (t1 * t2.transpose() + t2 * t1.transpose()) * b
            + t2 * t2.transpose() * c;
    }

    // Per-face frames: blend corner operators, project into the face plane,
    // take principal directions of the 2×2 restriction.
    let mut frames = Vec::with_capacity(mesh.n_faces());
    for (f, tri) in mesh.faces().iter().enumerate() {
        let normal = mesh.face_normal(f);
        let first_edge = mesh.vertices()[tri[1]] - mesh.vertices()[tri[0]];
        let t1 = first_edge / first_edge.norm();
        let t2 = normal.cross(&t1);

        let mut blended = Matrix3::zeros();
        let mut weight = 0.0;
        for &v in tri {
            blended += shape_ops[v] * vertex_areas[v];
            weight += vertex_areas[v];
        }
        blended /= weight;
        let projector = Matrix3::identity() - normal * normal.transpose();
        let in_plane = projector * blended * projector;

        let p = (t1.transpose() * in_plane * t1)[0];
        let q = (t1.transpose() * in_plane * t2)[0];
        let s = (t2.transpose() * in_plane * t2)[0];
        let mid = 0.5 * (p + s);
        let radius = (0.25 * (p - s) * (p - s) + q * q).sqrt();
        let kappa_hi = mid + radius;
        let kappa_lo = mid - radius;
        let dominant = kappa_hi.abs().max(kappa_lo.abs());

        let u_max = if dominant <= 1e-12 || (kappa_hi.abs() - kappa_lo.abs()).abs() <= 1e-6 * dominant
        {
            report.fallback_faces.push(f);
            t1
        } else {
            let target = if kappa_hi.abs() >= kappa_lo.abs() {
                kappa_hi
            } else {
                kappa_lo
            };
            // Eigenvector of [[p, q], [q, s]] for `target`, picking the more
            // numerically robust of the two analytic expressions.
            let cand_a = (q, target - p);
            let cand_b = (target - s, q);
            let (c1, c2) = if cand_a.0.hypot(cand_a.1) >= cand_b.0.hypot(cand_b.1) {
                cand_a
            } else {
                cand_b
            };
            let len = c1.hypot(c2);
            if len <= 1e-14 * dominant {
                report.fallback_faces.push(f);
                t1
            } else {
                let dir = t1 * (c1 / len) + t2 * (c2 / len);
                dir / dir.norm()
            }
        };
        let u_min = normal.cross(&u_max);
        frames.push(FaceFrame {
            u_max,
            u_min,
            normal,
        });
    }

    (frames, report)
}

/// Deterministic orthonormal tangent basis for a unit normal: starts from the
/// global axis least aligned with the normal.
fn tangent_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let axes = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut best = axes[0];
    let mut best_dot = f64::INFINITY;
    for axis in axes {
        let d = normal.dot(&axis).abs();
        if d < best_dot {
            best_dot = d;
            best = axis;
        }
    }
    let t1 = best - normal * normal.dot(&best);
    let t1 = t1 / t1.norm();
    let t2 = normal.cross(&t1);
    (t1, t2)
}
