//! Discrete operator assembly.
//!
//! Per face and orientation angle θ the assembly builds a shear tensor
//! `H = R_θ U D̃ Uᵀ R_θᵀ` aligned with the curvature frame `U`, a Randers
//! metric `(M = H⁻¹, ω = τ R_θ û_M)`, its dual, and the Finsler diffusivity
//! `D`. The operator pair is then the lumped mass matrix `S` (one third of
//! incident face areas per vertex) and the anisotropic cotangent-type
//! stiffness `W` with
//!
//! `w_ij = ½(⟨ê_kj, ê_ki⟩_{D_k}/sin α_ij + ⟨ê_hj, ê_hi⟩_{D_h}/sin β_ij)`
//!
//! over the faces adjacent to edge `(i, j)` (boundary edges keep their single
//! term), `w_ii = −Σ_{j≠i} w_ij`. `W` is symmetric with zero row sums and
//! `−W` is positive semidefinite; the discrete operator is `−S⁻¹W`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use nalgebra_sparse::{CooMatrix, CscMatrix};
use serde::Serialize;

use crate::error::{FlboError, Result};
use crate::mesh::{
    edge_opposite_angles, estimate_curvature_frames, EdgeAngles, FaceFrame,
    FrameEstimationReport, TriangleMesh,
};
use crate::randers::{
    dual_randers, finsler_diffusivity, DualRandersMetric, FinslerDiffusivity, RandersMetric,
    SpdTensor,
};

/// Faces whose drift norm reaches this bound get ω rescaled to it, keeping
/// the duality well-posed on degenerate or high-curvature faces.
pub const DRIFT_CLAMP: f64 = 0.99;

/// Sine floor for near-degenerate opposite angles; weights use
/// `max(sin, SIN_FLOOR)` and the clamp is recorded as a sliver warning.
pub const SIN_FLOOR: f64 = 1e-8;

/// Anisotropy configuration: the anisotropy level `a` (shrinks the metric
/// along `û_M` by `1/(1+a)`), the drift strength τ, and the number of
/// uniformly spaced orientation angles in `[0, π)`.
///
/// The field is named `anisotropy_level` because the Randers duality scalar
/// is conventionally called alpha as well; see `randers::DualRandersMetric`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnisotropyParams {
    pub anisotropy_level: f64,
    pub tau: f64,
    pub n_angles: usize,
}

impl AnisotropyParams {
    pub fn new(anisotropy_level: f64, tau: f64, n_angles: usize) -> Result<Self> {
        if !(anisotropy_level >= 0.0) || !(tau >= 0.0) {
            return Err(FlboError::Config(format!(
                "anisotropy_level ({anisotropy_level}) and tau ({tau}) must be nonnegative"
            )));
        }
        if n_angles < 1 {
            return Err(FlboError::Config("n_angles must be at least 1".into()));
        }
        Ok(Self {
            anisotropy_level,
            tau,
            n_angles,
        })
    }

    /// `θ_t = t·π/n_angles` for `t = 0..n_angles`.
    pub fn theta_values(&self) -> Vec<f64> {
        (0..self.n_angles)
            .map(|t| t as f64 * std::f64::consts::PI / self.n_angles as f64)
            .collect()
    }
}

fn rotation_about_z(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Shear tensor `H = R_θ U D̃ Uᵀ R_θᵀ` where `D̃ = diag(1/(1+a), 1, 1)` in the
/// `(û_M, û_m, n̂)` frame and `R_θ` rotates about the face normal. The unit
/// normal slot keeps near-tangent numerical noise undistorted, and `a = 0`
/// yields exactly the identity. Since `R_θ = U R̃_θ Uᵀ` for the in-plane
/// rotation `R̃_θ`, the product collapses to `U R̃_θ D̃ R̃_θᵀ Uᵀ`.
pub fn build_shear(frame: &FaceFrame, params: &AnisotropyParams, theta: f64) -> Matrix3<f64> {
    let d_alpha = Matrix3::from_diagonal(&Vector3::new(
        1.0 / (1.0 + params.anisotropy_level),
        1.0,
        1.0,
    ));
    let u = frame.matrix();
    let r = rotation_about_z(theta);
    let h = u * r * d_alpha * r.transpose() * u.transpose();
    (h + h.transpose()) * 0.5
}

/// The full per-face metric bundle for one orientation.
#[derive(Clone, Debug)]
pub struct FaceMetrics {
    pub shear: Matrix3<f64>,
    pub metric: RandersMetric,
    pub dual: DualRandersMetric,
    pub diffusivity: FinslerDiffusivity,
}

/// Builds the per-face Randers metric `(M = H⁻¹, ω = τ R_θ û_M)` and its
/// diffusivity. Returns whether the drift had to be clamped to stay inside
/// the validity bound.
pub fn build_face_metrics(
    frame: &FaceFrame,
    params: &AnisotropyParams,
    theta: f64,
) -> Result<(FaceMetrics, bool)> {
    let h = build_shear(frame, params, theta);
    let m = SpdTensor::new(
        h.try_inverse()
            .ok_or_else(|| FlboError::Solver("shear tensor is numerically singular".into()))?,
    )?;
    // R_θ û_M expressed through the frame: U·(cos θ, sin θ, 0).
    let direction = frame.matrix() * Vector3::new(theta.cos(), theta.sin(), 0.0);
    let mut omega = direction * params.tau;
    // ‖ω‖²_{M⁻¹} = ωᵀHω because M = H⁻¹.
    let drift = (h * omega).dot(&omega).max(0.0).sqrt();
    let clamped = drift >= DRIFT_CLAMP;
    if clamped {
        omega *= DRIFT_CLAMP / drift;
    }
    let metric = RandersMetric::new(m, omega)?;
    let dual = dual_randers(&metric)?;
    let diffusivity = finsler_diffusivity(&dual)?;
    Ok((
        FaceMetrics {
            shear: h,
            metric,
            dual,
            diffusivity,
        },
        clamped,
    ))
}

/// Convenience wrapper returning just the metric and diffusivity.
pub fn build_face_randers(
    frame: &FaceFrame,
    params: &AnisotropyParams,
    theta: f64,
) -> Result<(RandersMetric, FinslerDiffusivity)> {
    let (metrics, _) = build_face_metrics(frame, params, theta)?;
    Ok((metrics.metric, metrics.diffusivity))
}

/// Per-face metric bundles for one orientation angle, plus the faces whose
/// drift was clamped.
#[derive(Clone, Debug)]
pub struct FaceMetricField {
    pub per_face: Vec<FaceMetrics>,
    pub theta: f64,
    pub clamped_faces: Vec<usize>,
}

impl FaceMetricField {
    /// Builds the field from curvature frames (one per face).
    pub fn from_frames(
        frames: &[FaceFrame],
        params: &AnisotropyParams,
        theta: f64,
    ) -> Result<Self> {
        let mut per_face = Vec::with_capacity(frames.len());
        let mut clamped_faces = Vec::new();
        for (f, frame) in frames.iter().enumerate() {
            let (metrics, clamped) = build_face_metrics(frame, params, theta)?;
            if clamped {
                clamped_faces.push(f);
            }
            per_face.push(metrics);
        }
        Ok(Self {
            per_face,
            theta,
            clamped_faces,
        })
    }

    /// Builds the field from explicitly given per-face metrics (the shear
    /// slot becomes `M⁻¹`); used when a metric field comes from outside the
    /// curvature-frame construction.
    pub fn from_metrics(metrics: Vec<RandersMetric>, theta: f64) -> Result<Self> {
        let mut per_face = Vec::with_capacity(metrics.len());
        for metric in metrics {
            let dual = dual_randers(&metric)?;
            let diffusivity = finsler_diffusivity(&dual)?;
            per_face.push(FaceMetrics {
                shear: metric.m().inverse(),
                metric,
                dual,
                diffusivity,
            });
        }
        Ok(Self {
            per_face,
            theta,
            clamped_faces: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.per_face.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_face.is_empty()
    }

    /// Per-face dual drift vectors ω*, the source field of the simplified
    /// heat equation.
    pub fn omega_star_field(&self) -> Vec<Vector3<f64>> {
        self.per_face
            .iter()
            .map(|m| *m.dual.omega_star())
            .collect()
    }
}

/// Near-degenerate angle encountered during stiffness assembly.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SliverEdge {
    pub edge: (usize, usize),
    pub face: usize,
    pub sine: f64,
}

/// Lumped diagonal mass matrix: `S_ii` is one third of the areas of faces
/// incident to vertex `i`; the diagonal sums to the total surface area.
pub fn assemble_mass(mesh: &TriangleMesh) -> DVector<f64> {
    let mut mass = DVector::zeros(mesh.n_vertices());
    for (f, tri) in mesh.faces().iter().enumerate() {
        let third = mesh.face_area(f) / 3.0;
        for &v in tri {
            mass[v] += third;
        }
    }
    mass
}

/// Assembles the anisotropic stiffness matrix from per-edge opposite-angle
/// data and a per-face metric field. Triplets are accumulated in sorted edge
/// order, so the result is bit-stable for a given mesh and field.
pub fn assemble_stiffness(
    mesh: &TriangleMesh,
    angles: &EdgeAngles,
    field: &FaceMetricField,
) -> Result<(CscMatrix<f64>, Vec<SliverEdge>)> {
    if field.len() != mesh.n_faces() {
        return Err(FlboError::MalformedInput(format!(
            "metric field has {} entries for {} faces",
            field.len(),
            mesh.n_faces()
        )));
    }
    let n = mesh.n_vertices();
    let mut slivers = Vec::new();
    let mut diagonal = vec![0.0f64; n];
    let mut coo = CooMatrix::new(n, n);

    for info in &angles.per_edge {
        let (i, j) = info.vertices;
        let mut weight = 0.0;
        for corner in [Some(&info.first), info.second.as_ref()].into_iter().flatten() {
            let d = field.per_face[corner.face].diffusivity.matrix();
            let mut sine = corner.angle.sin();
            if sine < SIN_FLOOR {
                slivers.push(SliverEdge {
                    edge: (i, j),
                    face: corner.face,
                    sine,
                });
                sine = SIN_FLOOR;
            }
            weight += 0.5 * (d * corner.unit_to_second).dot(&corner.unit_to_first) / sine;
        }
        coo.push(i, j, weight);
        coo.push(j, i, weight);
        diagonal[i] -= weight;
        diagonal[j] -= weight;
    }
    for (i, &d) in diagonal.iter().enumerate() {
        coo.push(i, i, d);
    }
    Ok((CscMatrix::from(&coo), slivers))
}

/// One orientation's mass/stiffness pair. The discrete operator is `−S⁻¹W`,
/// positive semidefinite.
#[derive(Clone, Debug)]
pub struct OperatorPair {
    pub mass: DVector<f64>,
    pub stiffness: CscMatrix<f64>,
    pub theta: f64,
}

impl OperatorPair {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// Applies the positive-semidefinite operator `L = −S⁻¹W` to a field.
    pub fn laplacian_apply(&self, f: &DVector<f64>) -> DVector<f64> {
        let wf = &self.stiffness * f;
        DVector::from_fn(self.n(), |i, _| -wf[i] / self.mass[i])
    }

    /// Dense copy of `W` for small-matrix diagnostics and tests.
    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let mut dense = DMatrix::zeros(self.n(), self.n());
        for (i, j, v) in self.stiffness.triplet_iter() {
            dense[(i, j)] = *v;
        }
        dense
    }
}

/// An assembled operator plus the metric field and warnings it was built
/// from.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    pub pair: OperatorPair,
    pub field: FaceMetricField,
    pub slivers: Vec<SliverEdge>,
}

/// Assembles the operator pair for a single orientation angle, estimating
/// curvature frames internally.
pub fn assemble_flbo(
    mesh: &TriangleMesh,
    params: &AnisotropyParams,
    theta: f64,
) -> Result<AssembledOperator> {
    let (frames, _) = estimate_curvature_frames(mesh);
    let angles = edge_opposite_angles(mesh);
    assemble_for_theta(mesh, &frames, &angles, params, theta)
}

fn assemble_for_theta(
    mesh: &TriangleMesh,
    frames: &[FaceFrame],
    angles: &EdgeAngles,
    params: &AnisotropyParams,
    theta: f64,
) -> Result<AssembledOperator> {
    let field = FaceMetricField::from_frames(frames, params, theta)?;
    let (stiffness, slivers) = assemble_stiffness(mesh, angles, &field)?;
    let pair = OperatorPair {
        mass: assemble_mass(mesh),
        stiffness,
        theta,
    };
    Ok(AssembledOperator {
        pair,
        field,
        slivers,
    })
}

/// The operator family across all orientation angles; curvature frames and
/// opposite angles are computed once and shared, and every member reuses the
/// same (θ-independent) mass matrix values.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    pub members: Vec<AssembledOperator>,
    pub frames: Vec<FaceFrame>,
    pub frame_report: FrameEstimationReport,
}

pub fn assemble_family(mesh: &TriangleMesh, params: &AnisotropyParams) -> Result<OperatorFamily> {
    let (frames, frame_report) = estimate_curvature_frames(mesh);
    let angles = edge_opposite_angles(mesh);
    let mut members = Vec::with_capacity(params.n_angles);
    for theta in params.theta_values() {
        members.push(assemble_for_theta(mesh, &frames, &angles, params, theta)?);
    }
    Ok(OperatorFamily {
        members,
        frames,
        frame_report,
    })
}

/// JSON-serializable assembly report: clamped faces and sliver warnings per
/// orientation, plus frame-estimation fallbacks.
#[derive(Clone, Debug, Serialize)]
pub struct AssemblyReport {
    pub frame_fallback_faces: Vec<usize>,
    pub underdetermined_vertices: Vec<usize>,
    pub per_theta: Vec<ThetaReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaReport {
    pub theta: f64,
    pub clamped_faces: Vec<usize>,
    pub slivers: Vec<SliverEdge>,
}

impl OperatorFamily {
    pub fn report(&self) -> AssemblyReport {
        AssemblyReport {
            frame_fallback_faces: self.frame_report.fallback_faces.clone(),
            underdetermined_vertices: self.frame_report.underdetermined_vertices.clone(),
            per_theta: self
                .members
                .iter()
                .map(|m| ThetaReport {
                    theta: m.pair.theta,
                    clamped_faces: m.field.clamped_faces.clone(),
                    slivers: m.slivers.clone(),
                })
                .collect(),
        }
    }
}
