//! Randers-metric algebra.
//!
//! A Randers metric on a tangent space is `F(v) = ‖v‖_M + ⟨ω, v⟩` where `M` is
//! symmetric positive definite and the drift satisfies `‖ω‖_{M⁻¹} < 1`
//! (strictly), which keeps `F` positive away from the origin. Its dual norm
//! `F*(v) = max{⟨v, b⟩ : F(b) ≤ 1}` is again a Randers metric with closed-form
//! tensors `(M*, ω*)`; the dual pair defines the Finsler diffusivity
//! `D = M* − ω*ω*ᵀ` used by the operator assembly.
//!
//! All tensors are 3×3 in the ambient frame even though tangent spaces are
//! two-dimensional: the assembly takes inner products of 3-D edge vectors, and
//! the normal direction carries a unit metric slot so it never distorts
//! near-tangent numerical noise.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{FlboError, Result};

/// Relative tolerance for symmetry of metric tensors.
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalue positivity is measured against the trace, which is scale-free
/// and cheap at 3×3.
const SPD_EIG_TOL: f64 = 1e-12;

/// A symmetric positive definite 3×3 tensor.
///
/// Construction validates symmetry (1e-12 relative) and positivity of all
/// eigenvalues (against `1e-12·trace`); the stored matrix is the symmetrized
/// average of the input so downstream algebra sees exact symmetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdTensor {
    entries: Matrix3<f64>,
}

impl SpdTensor {
    pub fn new(entries: Matrix3<f64>) -> Result<Self> {
        if !entries.iter().all(|x| x.is_finite()) {
            return Err(FlboError::MalformedInput(
                "tensor has non-finite entries".into(),
            ));
        }
        let defect = symmetry_defect(&entries);
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        if defect > SYMMETRY_TOL * scale {
            return Err(FlboError::InvalidMetric(format!(
                "tensor is not symmetric: defect {defect:.3e} exceeds {SYMMETRY_TOL:.0e} relative"
            )));
        }
        let sym = (entries + entries.transpose()) * 0.5;
        let min_eig = min_eigenvalue(&sym);
        let trace = sym.trace();
        if !(trace > 0.0) || min_eig <= SPD_EIG_TOL * trace {
            return Err(FlboError::InvalidMetric(format!(
                "tensor is not positive definite: min eigenvalue {min_eig:.3e}, trace {trace:.3e}"
            )));
        }
        Ok(Self { entries: sym })
    }

    pub fn identity() -> Self {
        Self {
            entries: Matrix3::identity(),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.entries
    }

    /// Inverse of an SPD tensor is SPD; failure is impossible for a valid
    /// instance, so this symmetrizes away round-off and returns the result.
    pub fn inverse(&self) -> Matrix3<f64> {
        let inv = self
            .entries
            .try_inverse()
            .expect("SPD tensor is invertible");
        (inv + inv.transpose()) * 0.5
    }

    /// `vᵀ A v`.
    pub fn quadratic_form(&self, v: &Vector3<f64>) -> f64 {
        (self.entries * v).dot(v)
    }

    /// `‖v‖_A = √(vᵀ A v)`.
    pub fn norm_of(&self, v: &Vector3<f64>) -> f64 {
        self.quadratic_form(v).max(0.0).sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }
}

fn symmetry_defect(m: &Matrix3<f64>) -> f64 {
    let mut defect: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    defect
}

fn min_eigenvalue(m: &Matrix3<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    eig.eigenvalues.min()
}

/// Diagnostic produced by [`validate_randers`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ValidityReport {
    /// Largest absolute off-diagonal asymmetry of `M`.
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of the symmetrized `M`.
    pub min_eigenvalue: f64,
    /// `ωᵀM⁻¹ω`; validity requires this to be strictly below 1.
    pub drift_quadratic: f64,
    pub valid: bool,
}

/// Checks whether `(m, omega)` forms a valid Randers metric and reports the
/// quantities the decision rests on. Only non-finite input is an error; an
/// invalid metric yields `valid: false` with the measurements filled in.
pub fn validate_randers(m: &Matrix3<f64>, omega: &Vector3<f64>) -> Result<ValidityReport> {
    if !m.iter().all(|x| x.is_finite()) || !omega.iter().all(|x| x.is_finite()) {
        return Err(FlboError::MalformedInput(
            "metric has non-finite entries".into(),
        ));
    }
    let defect = symmetry_defect(m);
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let sym = (m + m.transpose()) * 0.5;
    let min_eig = min_eigenvalue(&sym);
    let trace = sym.trace();
    let spd = defect <= SYMMETRY_TOL * scale && trace > 0.0 && min_eig > SPD_EIG_TOL * trace;
    let drift_quadratic = if spd {
        let inv = sym.try_inverse().expect("SPD tensor is invertible");
        (inv * omega).dot(omega)
    } else {
        f64::INFINITY
    };
    Ok(ValidityReport {
        symmetry_defect: defect,
        min_eigenvalue: min_eig,
        drift_quadratic,
        valid: spd && drift_quadratic < 1.0,
    })
}

/// A valid Randers metric `(M, ω)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandersMetric {
    m: SpdTensor,
    omega: Vector3<f64>,
}

impl RandersMetric {
    /// Validates `‖ω‖_{M⁻¹} < 1` (strict) on top of the tensor's own
    /// invariants.
    pub fn new(m: SpdTensor, omega: Vector3<f64>) -> Result<Self> {
        if !omega.iter().all(|x| x.is_finite()) {
            return Err(FlboError::MalformedInput(
                "drift vector has non-finite entries".into(),
            ));
        }
        let drift = (m.inverse() * omega).dot(&omega);
        if drift >= 1.0 {
            return Err(FlboError::InvalidMetric(format!(
                "drift too large: ωᵀM⁻¹ω = {drift:.6} must be < 1"
            )));
        }
        Ok(Self { m, omega })
    }

    /// The Riemannian case `F(v) = ‖v‖`.
    pub fn euclidean() -> Self {
        Self {
            m: SpdTensor::identity(),
            omega: Vector3::zeros(),
        }
    }

    pub fn m(&self) -> &SpdTensor {
        &self.m
    }

    pub fn omega(&self) -> &Vector3<f64> {
        &self.omega
    }

    /// `ωᵀM⁻¹ω` — the validity margin.
    pub fn drift_quadratic(&self) -> f64 {
        (self.m.inverse() * self.omega).dot(&self.omega)
    }

    /// `‖ω‖_{M⁻¹}`, exposed so callers can report how far a metric is from
    /// the Riemannian regime; no cutoff is asserted here.
    pub fn drift_norm(&self) -> f64 {
        self.drift_quadratic().max(0.0).sqrt()
    }
}

#[derive(Serialize, Deserialize)]
struct MetricJson {
    #[serde(rename = "M")]
    m: [f64; 9],
    omega: [f64; 3],
}

impl Serialize for RandersMetric {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                m[3 * i + j] = self.m.matrix()[(i, j)];
            }
        }
        MetricJson {
            m,
            omega: [self.omega.x, self.omega.y, self.omega.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RandersMetric {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = MetricJson::deserialize(deserializer)?;
        let m = Matrix3::from_fn(|i, j| raw.m[3 * i + j]);
        let tensor = SpdTensor::new(m).map_err(serde::de::Error::custom)?;
        RandersMetric::new(tensor, Vector3::new(raw.omega[0], raw.omega[1], raw.omega[2]))
            .map_err(serde::de::Error::custom)
    }
}

/// Evaluates `F(v) = ‖v‖_M + ⟨ω, v⟩`; strictly positive for `v ≠ 0` and
/// positively homogeneous of degree 1.
pub fn eval_primal(metric: &RandersMetric, v: &Vector3<f64>) -> f64 {
    metric.m.norm_of(v) + metric.omega.dot(v)
}

/// The dual of a Randers metric, itself a Randers metric `(M*, ω*)` together
/// with the duality scalar `α = 1 − ωᵀM⁻¹ω ∈ (0, 1]`.
///
/// The field is named `randers_alpha` because the anisotropy level of the
/// operator assembly is conventionally called alpha as well; the two are
/// unrelated and live in different modules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualRandersMetric {
    m_star: SpdTensor,
    omega_star: Vector3<f64>,
    randers_alpha: f64,
}

impl DualRandersMetric {
    pub fn new(m_star: SpdTensor, omega_star: Vector3<f64>, randers_alpha: f64) -> Result<Self> {
        if !(randers_alpha > 0.0 && randers_alpha <= 1.0) {
            return Err(FlboError::InvalidMetric(format!(
                "duality scalar {randers_alpha:.6} must lie in (0, 1]"
            )));
        }
        // Re-running the Randers validation checks ‖ω*‖_{M*⁻¹} < 1.
        let as_randers = RandersMetric::new(m_star, omega_star)?;
        Ok(Self {
            m_star: *as_randers.m(),
            omega_star: *as_randers.omega(),
            randers_alpha,
        })
    }

    pub fn m_star(&self) -> &SpdTensor {
        &self.m_star
    }

    pub fn omega_star(&self) -> &Vector3<f64> {
        &self.omega_star
    }

    pub fn randers_alpha(&self) -> f64 {
        self.randers_alpha
    }

    /// The dual norm is itself Randers; this reinterprets `(M*, ω*)` as a
    /// primal metric (used by the involution property and by dual evaluation).
    pub fn as_randers(&self) -> RandersMetric {
        RandersMetric {
            m: self.m_star,
            omega: self.omega_star,
        }
    }

    /// Closed-form dual evaluation `F*(v) = ‖v‖_{M*} + ⟨ω*, v⟩`.
    pub fn eval(&self, v: &Vector3<f64>) -> f64 {
        self.m_star.norm_of(v) + self.omega_star.dot(v)
    }
}

/// Closed-form dual: with `α = 1 − ωᵀM⁻¹ω`,
/// `M* = (1/α²)(αM⁻¹ + (M⁻¹ω)(M⁻¹ω)ᵀ)` and `ω* = −(1/α)M⁻¹ω`.
pub fn dual_randers(metric: &RandersMetric) -> Result<DualRandersMetric> {
    let m_inv = metric.m.inverse();
    let w = m_inv * metric.omega;
    let alpha = 1.0 - w.dot(&metric.omega);
    if !(alpha > 0.0) {
        return Err(FlboError::InvalidMetric(format!(
            "duality scalar {alpha:.6} is not positive; metric violates its drift bound"
        )));
    }
    let m_star = (m_inv * alpha + w * w.transpose()) / (alpha * alpha);
    let omega_star = -w / alpha;
    DualRandersMetric::new(SpdTensor::new(m_star)?, omega_star, alpha)
}

/// Independent dual computation through the 4×4 block matrix
/// `[[M, ω], [ωᵀ, 1]]`: its inverse is `[[αM*, ω*], [ω*ᵀ, 1/α]]`, so a general
/// matrix inversion recovers `(M*, ω*, α)` without using the closed form.
/// Serves as the oracle for [`dual_randers`].
pub fn dual_via_block_inverse(metric: &RandersMetric) -> Result<DualRandersMetric> {
    let mut block = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            block[(i, j)] = metric.m.matrix()[(i, j)];
        }
        block[(i, 3)] = metric.omega[i];
        block[(3, i)] = metric.omega[i];
    }
    block[(3, 3)] = 1.0;
    let inv = block.try_inverse().ok_or_else(|| {
        FlboError::Solver("4×4 metric block is singular; the input metric is invalid".into())
    })?;
    let inv_alpha = inv[(3, 3)];
    if !(inv_alpha.is_finite() && inv_alpha > 0.0) {
        return Err(FlboError::Solver(format!(
            "block inverse produced a non-positive duality scalar slot {inv_alpha:.6e}"
        )));
    }
    let alpha = 1.0 / inv_alpha;
    // The top-left block of the inverse is α·M*, so dividing by α (i.e.
    // multiplying by the scalar slot) recovers M* itself.
    let mut m_star = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m_star[(i, j)] = inv[(i, j)] * inv_alpha;
        }
    }
    let omega_star = Vector3::new(inv[(0, 3)], inv[(1, 3)], inv[(2, 3)]);
    DualRandersMetric::new(SpdTensor::new(m_star)?, omega_star, alpha)
}

/// Brute-force dual evaluation straight from the definition
/// `F*(v) = max{⟨v, b⟩ : F(b) ≤ 1}`.
///
/// By 1-homogeneity the maximizer lies on `F(b) = 1`, so the search scans
/// `n_samples` Fibonacci-lattice directions `u` on the unit sphere, scores
/// `⟨v, u⟩ / F(u)` (the value at `b = u/F(u)`), and refines the best direction
/// with a derivative-free compass walk along tangent great circles whose
/// angular step shrinks from the lattice spacing to 1e-8 radians.
pub fn eval_dual_definition(
    metric: &RandersMetric,
    v: &Vector3<f64>,
    n_samples: usize,
) -> Result<f64> {
    if n_samples < 16 {
        return Err(FlboError::Config(format!(
            "n_samples = {n_samples} is below the minimum of 16"
        )));
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(FlboError::MalformedInput(
            "direction has non-finite entries".into(),
        ));
    }
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return Ok(0.0);
    }

    let score = |u: &Vector3<f64>| -> f64 { v.dot(u) / eval_primal(metric, u) };

    // Fibonacci lattice over the sphere, plus v's own direction as a seed
    // (exact for the Euclidean case).
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let mut best_u = v / v_norm;
    let mut best = score(&best_u);
    for i in 0..n_samples {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n_samples as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden * i as f64;
        let u = Vector3::new(r * phi.cos(), r * phi.sin(), z);
        let s = score(&u);
        if s > best {
            best = s;
            best_u = u;
        }
    }

    // Compass refinement: from the best sampled direction, walk along
    // tangent great circles with a shrinking angular step. The score is
    // 0-homogeneous and smooth near its unique maximum, so stalling at step
    // `h` leaves a value error quadratic in `h`; halving down to 1e-8
    // radians is far below the accuracy the lattice alone provides.
    let mut u = best_u;
    let mut h = (4.0 * std::f64::consts::PI / n_samples as f64).sqrt();
    let mut budget = 4000usize;
    while h > 1e-8 && budget > 0 {
        let pivot = if u.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let t1 = (pivot - u * u.dot(&pivot)).normalize();
        let t2 = u.cross(&t1);
        let mut improved = false;
        for tangent in [t1, t2, -t1, -t2] {
            budget = budget.saturating_sub(1);
            let candidate = (u * h.cos() + tangent * h.sin()).normalize();
            let s = score(&candidate);
            if s > best {
                best = s;
                u = candidate;
                improved = true;
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(best)
}

/// The Finsler diffusivity tensor `D = M* − ω*ω*ᵀ`.
///
/// `D` is symmetric and positive definite for every valid metric (Schur
/// complement of the dual drift bound); construction allows a relative
/// eigenvalue slack of `1e-12·‖D‖` for round-off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinslerDiffusivity {
    d: Matrix3<f64>,
}

impl FinslerDiffusivity {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.d
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.d)
    }
}

/// Computes `D = M* − ω*ω*ᵀ` from a dual metric.
pub fn finsler_diffusivity(dual: &DualRandersMetric) -> Result<FinslerDiffusivity> {
    let d = dual.m_star.matrix() - dual.omega_star * dual.omega_star.transpose();
    let d = (d + d.transpose()) * 0.5;
    let min_eig = min_eigenvalue(&d);
    let scale = d.amax().max(f64::MIN_POSITIVE);
    if min_eig <= -1e-12 * scale {
        return Err(FlboError::InvalidMetric(format!(
            "diffusivity lost positivity: min eigenvalue {min_eig:.3e} at scale {scale:.3e}"
        )));
    }
    Ok(FinslerDiffusivity { d })
}
