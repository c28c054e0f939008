//! Time-domain diffusion solvers and the nonlinear Finsler right-hand side.
//!
//! These are the independent references the spectral path is checked
//! against: an unconditionally stable implicit Euler stepper for
//! `S u̇ = W u + S·source`, the FEM weak divergence dual to the
//! piecewise-linear face gradient, the closed-form solve of the simplified
//! Randers heat equation (homogeneous heat flow plus the time-averaged
//! response to the `div(ω*)` source), and a pointwise evaluator of the full
//! nonlinear Finsler flux `P = F*(∇u)(M*∇u/‖∇u‖_{M*} + ω*)`.

use nalgebra::{DMatrix, DVector, Vector3};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{FlboError, Result};
use crate::mesh::{hat_gradient, TriangleMesh};
use crate::operator::{assemble_mass, FaceMetricField, OperatorPair};
use crate::spectral::{heat_propagate, SpectralBasis, RELATIVE_NULL_TOL};

/// Faces with `‖∇u‖_{M*}` at or below this are flagged and contribute zero
/// nonlinear flux.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// Implicit Euler configuration: integrate to `t_final` in `n_steps` equal
/// steps.
#[derive(Clone, Copy, Debug)]
pub struct DiffusionConfig {
    pub t_final: f64,
    pub n_steps: usize,
}

impl DiffusionConfig {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final >= 0.0) {
            return Err(FlboError::Config(format!(
                "t_final must be nonnegative, got {t_final}"
            )));
        }
        if n_steps < 1 {
            return Err(FlboError::Config("n_steps must be at least 1".into()));
        }
        Ok(Self { t_final, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }
}

/// FEM weak divergence of a per-face vector field: `b_i = −Σ_{f ∋ i}
/// area(f)·⟨field_f, ∇φ_i|_f⟩` converted to a pointwise value via `S⁻¹b`.
/// This is the exact adjoint of the face gradient under the area/mass
/// pairing, so applying it to `face_gradient(f)` reproduces `S⁻¹Wf`.
pub fn divergence_of_field(mesh: &TriangleMesh, field: &[Vector3<f64>]) -> Result<DVector<f64>> {
    if field.len() != mesh.n_faces() {
        return Err(FlboError::MalformedInput(format!(
            "field has {} vectors for {} faces",
            field.len(),
            mesh.n_faces()
        )));
    }
    let n = mesh.n_vertices();
    let mut weak = DVector::zeros(n);
    for (f, tri) in mesh.faces().iter().enumerate() {
        let area = mesh.face_area(f);
        for (corner, &i) in tri.iter().enumerate() {
            let grad_phi = hat_gradient(mesh, f, corner);
            weak[i] -= area * field[f].dot(&grad_phi);
        }
    }
    let mass = assemble_mass(mesh);
    for (i, s) in mass.iter().enumerate() {
        if !(*s > 0.0) {
            return Err(FlboError::Mesh(format!(
                "vertex {i} has no area support; cannot form a pointwise divergence"
            )));
        }
    }
    Ok(weak.component_div(&mass))
}

/// Integrates `S u̇ = W u + S·source` with implicit Euler steps
/// `(S + Δt·(−W)) f⁺ = S f + Δt·S·source`. The system matrix is symmetric
/// positive definite and factored once; with no source the mass-weighted
/// total `Σ S_ii f_i` is conserved to roundoff because the stiffness rows
/// sum to zero.
pub fn implicit_euler_diffuse(
    pair: &OperatorPair,
    f0: &DVector<f64>,
    config: &DiffusionConfig,
    source: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = pair.n();
    if f0.len() != n {
        return Err(FlboError::Config(format!(
            "initial field has length {} for an operator of dimension {n}",
            f0.len()
        )));
    }
    if let Some(src) = source {
        if src.len() != n {
            return Err(FlboError::Config(format!(
                "source field has length {} for an operator of dimension {n}",
                src.len()
            )));
        }
    }
    if config.t_final == 0.0 {
        return Ok(f0.clone());
    }
    let dt = config.dt();
    let mut coo = CooMatrix::new(n, n);
    for (i, j, w) in pair.stiffness.triplet_iter() {
        coo.push(i, j, -dt * w);
    }
    for (i, &s) in pair.mass.iter().enumerate() {
        coo.push(i, i, s);
    }
    let system = CscMatrix::from(&coo);
    let factorization = CscCholesky::factor(&system).map_err(|e| {
        FlboError::Solver(format!(
            "implicit Euler factorization failed ({e:?}); S + Δt·(−W) must be positive definite — \
             check for nonpositive mass entries or an indefinite stiffness"
        ))
    })?;
    let step_source = source.map(|src| src.component_mul(&pair.mass) * dt);
    let mut f = f0.clone();
    let mut rhs = DMatrix::zeros(n, 1);
    for _ in 0..config.n_steps {
        let mut b = f.component_mul(&pair.mass);
        if let Some(extra) = &step_source {
            b += extra;
        }
        rhs.column_mut(0).copy_from(&b);
        let solution = factorization.solve(&rhs);
        f = solution.column(0).into_owned();
    }
    Ok(f)
}

/// Source vector of the simplified Randers heat equation: the weak
/// divergence of the per-face dual drift field ω*.
pub fn omega_star_divergence(mesh: &TriangleMesh, field: &FaceMetricField) -> Result<DVector<f64>> {
    divergence_of_field(mesh, &field.omega_star_field())
}

/// Closed-form solve of the simplified Randers heat equation
/// `∂u/∂t = −L u + div(ω*)`: the homogeneous heat propagation of `f0` plus
/// the particular response `Σ_k g_k(t)⟨φ_k, src⟩_S φ_k` with transfer
/// `g_k = (1 − e^{−tλ_k})/λ_k` (`t` on the null space) — the time-averaged
/// heat kernel applied to the source.
pub fn simplified_randers_solve(
    mesh: &TriangleMesh,
    basis: &SpectralBasis,
    field: &FaceMetricField,
    f0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    if basis.n() != mesh.n_vertices() {
        return Err(FlboError::Config(format!(
            "spectral basis dimension {} does not match mesh with {} vertices",
            basis.n(),
            mesh.n_vertices()
        )));
    }
    let homogeneous = heat_propagate(basis, f0, t)?;
    let src = omega_star_divergence(mesh, field)?;
    let mut coefficients = basis.project(&src)?;
    let null_tol = RELATIVE_NULL_TOL * basis.lambda_max_estimate().max(1.0);
    for (k, c) in coefficients.iter_mut().enumerate() {
        let lambda = basis.eigenvalues()[k];
        let g = if lambda.abs() <= null_tol {
            t
        } else {
            -(-t * lambda).exp_m1() / lambda
        };
        *c *= g;
    }
    let particular = basis.reconstruct(&coefficients)?;
    Ok(homogeneous + particular)
}

/// Right-hand side of the simplified (linear) Randers heat equation
/// evaluated through the same discrete divergence as the nonlinear path:
/// the weak divergence of the per-face flux `D∇u + ω*`.
pub fn simplified_randers_rhs(
    mesh: &TriangleMesh,
    field: &FaceMetricField,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if field.len() != mesh.n_faces() {
        return Err(FlboError::MalformedInput(format!(
            "metric field has {} entries for {} faces",
            field.len(),
            mesh.n_faces()
        )));
    }
    let grads = mesh.face_gradient(u.as_slice())?;
    let flux: Vec<Vector3<f64>> = grads
        .iter()
        .enumerate()
        .map(|(f, g)| {
            let metrics = &field.per_face[f];
            metrics.diffusivity.matrix() * g + metrics.dual.omega_star()
        })
        .collect();
    divergence_of_field(mesh, &flux)
}

/// One evaluation of the true nonlinear Finsler operator: the per-face flux
/// `P = F*(∇u)·(M*∇u/‖∇u‖_{M*} + ω*)` followed by the weak divergence.
/// Faces where `‖∇u‖_{M*}` vanishes (≤ `GRADIENT_FLOOR`) are returned in the
/// flagged list and contribute zero flux.
pub fn nonlinear_finsler_rhs(
    mesh: &TriangleMesh,
    field: &FaceMetricField,
    u: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<usize>)> {
    if field.len() != mesh.n_faces() {
        return Err(FlboError::MalformedInput(format!(
            "metric field has {} entries for {} faces",
            field.len(),
            mesh.n_faces()
        )));
    }
    let grads = mesh.face_gradient(u.as_slice())?;
    let mut flagged = Vec::new();
    let mut flux = Vec::with_capacity(grads.len());
    for (f, g) in grads.iter().enumerate() {
        let metrics = &field.per_face[f];
        let m_star = metrics.dual.m_star().matrix();
        let norm = (m_star * g).dot(g).max(0.0).sqrt();
        if norm <= GRADIENT_FLOOR {
            flagged.push(f);
            flux.push(Vector3::zeros());
            continue;
        }
        let f_star = norm + metrics.dual.omega_star().dot(g);
        flux.push((m_star * g / norm + metrics.dual.omega_star()) * f_star);
    }
    let rhs = divergence_of_field(mesh, &flux)?;
    Ok((rhs, flagged))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_zero_steps() {
        assert!(DiffusionConfig::new(0.1, 0).is_err());
        assert!(DiffusionConfig::new(-1.0, 10).is_err());
        assert!(DiffusionConfig::new(0.0, 1).is_ok());
    }

    #[test]
    fn divergence_rejects_length_mismatch() {
        let mesh = crate::shapes::two_triangle_square().unwrap();
        let field = vec![Vector3::zeros()];
        assert!(divergence_of_field(&mesh, &field).is_err());
    }
}
