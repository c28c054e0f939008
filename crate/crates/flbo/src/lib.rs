//! Finsler-Laplace-Beltrami operators on triangle meshes.
//!
//! The crate builds anisotropic Laplacians from Randers metrics — a Riemannian
//! tensor `M` plus a drift covector `ω` with `‖ω‖_{M⁻¹} < 1` — and provides the
//! machinery around them:
//!
//! - [`randers`]: exact Randers-metric algebra — validity, primal/dual
//!   evaluation, the closed-form dual metric, and the Finsler diffusivity
//!   tensor `D = M* − ω*ω*ᵀ`.
//! - [`mesh`]: triangle-mesh ingestion (OFF/OBJ) and the differential-geometry
//!   quantities the assembly needs: areas, opposite angles, edge unit vectors,
//!   curvature frames, and piecewise-linear gradients.
//! - [`shapes`]: deterministic built-in test meshes (icospheres, strips,
//!   cylinders, tetrahedra).
//! - [`operator`]: the discrete operator family — shear tensors, per-face
//!   Randers metrics, lumped mass matrices, and anisotropic cotangent
//!   stiffness matrices, one pair per orientation angle.
//! - [`spectral`]: generalized eigendecomposition, heat kernels (instantaneous
//!   and time-averaged), Chebyshev filters, anisotropic convolution, and
//!   heat-kernel-signature descriptors.
//! - [`diffusion`]: time-stepped and nonlinear reference solvers used as
//!   oracles for the spectral path.
//! - [`export`]: Matrix Market, CSV, and JSON serialization with atomic
//!   writes.
//! - [`validate`]: the named-check validation suite behind `flbo validate`.

pub mod diffusion;
pub mod error;
pub mod export;
pub mod mesh;
pub mod operator;
pub mod randers;
pub mod shapes;
pub mod spectral;
pub mod validate;

pub use error::{FlboError, Result};
