//! Spectral decomposition and heat-kernel machinery.
//!
//! The generalized eigenproblem `−W φ = λ S φ` is solved through the
//! symmetric whitening `A = S^{−1/2}(−W)S^{−1/2}`: eigenvectors `y` of `A`
//! map back as `φ = S^{−1/2} y`, which makes the basis S-orthonormal
//! (`ΦᵀSΦ = I`). Small problems use a dense symmetric solver; larger ones a
//! Lanczos iteration with full reorthogonalization, deterministic seeded
//! starts, and residual-verified Ritz pairs.
//!
//! On top of the basis: heat kernels `h_t = Σ e^{−tλ} φφᵀ`, time-averaged
//! kernels with transfer `(1 − e^{−tλ})/λ`, heat propagation, heat-kernel
//! signature descriptors, and matrix-free Chebyshev filtering for
//! anisotropic convolution without an eigensolve.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FlboError, Result};
use crate::operator::OperatorPair;

/// Eigenvalues at or below `RELATIVE_NULL_TOL · λ_max` are treated as zero
/// where a transfer function would otherwise divide by them.
pub const RELATIVE_NULL_TOL: f64 = 1e-12;

const CHECK_INTERVAL: usize = 8;
const POWER_ITERATIONS: usize = 60;

/// Options for the eigensolver.
#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Problems with `n ≤ dense_threshold` use the dense symmetric solver.
    pub dense_threshold: usize,
    /// Seed for the Lanczos start vector and the power-iteration estimate.
    pub seed: u64,
    /// Relative residual tolerance: pairs are accepted when
    /// `‖Aφ − λφ‖ ≤ residual_tol · λ_max`.
    pub residual_tol: f64,
    /// The Krylov dimension is capped at `max_iter_factor · k`.
    pub max_iter_factor: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 500,
            seed: 42,
            residual_tol: 1e-9,
            max_iter_factor: 30,
        }
    }
}

/// The lowest part of an operator's spectrum: eigenvalues ascending and the
/// S-orthonormal eigenvector columns, together with the mass diagonal used
/// for inner products and a spectral radius estimate.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    mass: DVector<f64>,
    lambda_max_estimate: f64,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    /// Upper estimate of the largest eigenvalue of the full operator (not
    /// just the computed part of the spectrum).
    pub fn lambda_max_estimate(&self) -> f64 {
        self.lambda_max_estimate
    }

    /// Mass-weighted inner product `⟨f, g⟩_S = Σ_i S_ii f_i g_i`.
    pub fn s_inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        f.iter()
            .zip(g.iter())
            .zip(self.mass.iter())
            .map(|((a, b), s)| a * b * s)
            .sum()
    }

    /// Spectral coefficients `ΦᵀSf`.
    pub fn project(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n(), f.len())?;
        let weighted = f.component_mul(&self.mass);
        Ok(self.eigenvectors.transpose() * weighted)
    }

    /// Reconstructs `Φc` from spectral coefficients.
    pub fn reconstruct(&self, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.k(), coefficients.len())?;
        Ok(&self.eigenvectors * coefficients)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(FlboError::Config(format!(
            "vector length {got} does not match expected dimension {expected}"
        )))
    }
}

/// Solves for the `k` lowest eigenpairs of `−S⁻¹W` with default options.
pub fn eigensolve(pair: &OperatorPair, k: usize) -> Result<SpectralBasis> {
    eigensolve_with(pair, k, &EigenOptions::default())
}

/// Solves for the `k` lowest eigenpairs of `−S⁻¹W`.
pub fn eigensolve_with(pair: &OperatorPair, k: usize, opts: &EigenOptions) -> Result<SpectralBasis> {
    let n = pair.n();
    if k == 0 {
        return Err(FlboError::Config("requested zero eigenpairs".into()));
    }
    if k > n {
        return Err(FlboError::Config(format!(
            "requested {k} eigenpairs from an operator of dimension {n}"
        )));
    }
    for (i, &s) in pair.mass.iter().enumerate() {
        if !(s > 0.0) {
            return Err(FlboError::Solver(format!(
                "mass matrix entry {i} is not positive: {s}"
            )));
        }
    }
    let inv_sqrt_mass = pair.mass.map(|s| 1.0 / s.sqrt());
    let basis = if n <= opts.dense_threshold {
        dense_eigensolve(pair, k, &inv_sqrt_mass, opts)
    } else {
        lanczos_eigensolve(pair, k, &inv_sqrt_mass, opts)
    }?;
    Ok(basis)
}

/// One application of the whitened operator `A = S^{−1/2}(−W)S^{−1/2}`.
fn apply_whitened(pair: &OperatorPair, inv_sqrt_mass: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let scaled = v.component_mul(inv_sqrt_mass);
    let wv = &pair.stiffness * scaled;
    let mut out = wv.component_mul(inv_sqrt_mass);
    out.neg_mut();
    out
}

fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}

/// Power-iteration estimate of the spectral radius, inflated by 1% so that
/// it upper-bounds the true value for filter and tolerance scaling.
fn power_lambda_max(pair: &OperatorPair, inv_sqrt_mass: &DVector<f64>, seed: u64) -> f64 {
    let n = pair.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut v = random_direction(n, &mut rng);
    let norm = v.norm();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v /= norm;
    }
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = apply_whitened(pair, inv_sqrt_mass, &v);
        lambda = v.dot(&w);
        let norm = w.norm();
        if norm <= 1e-300 {
            return 0.0;
        }
        v = w / norm;
    }
    lambda.abs() * 1.01
}

/// Estimate of the largest eigenvalue of `−S⁻¹W`, used to scale Chebyshev
/// filters when no spectral basis is available.
pub fn estimate_lambda_max(pair: &OperatorPair, seed: u64) -> f64 {
    let inv_sqrt_mass = pair.mass.map(|s| 1.0 / s.sqrt());
    power_lambda_max(pair, &inv_sqrt_mass, seed)
}

/// Deterministic sign convention: the entry of largest magnitude (lowest
/// index on exact ties) is made positive.
fn canonicalize_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn dense_eigensolve(
    pair: &OperatorPair,
    k: usize,
    inv_sqrt_mass: &DVector<f64>,
    opts: &EigenOptions,
) -> Result<SpectralBasis> {
    let n = pair.n();
    let mut a = DMatrix::zeros(n, n);
    for (i, j, v) in pair.stiffness.triplet_iter() {
        a[(i, j)] = -v * inv_sqrt_mass[i] * inv_sqrt_mass[j];
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        eig.eigenvalues[p]
            .partial_cmp(&eig.eigenvalues[q])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = DVector::from_fn(k, |i, _| eig.eigenvalues[order[i]]);
    let mut eigenvectors = DMatrix::zeros(n, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let y = eig.eigenvectors.column(idx);
        for row in 0..n {
            eigenvectors[(row, col)] = y[row] * inv_sqrt_mass[row];
        }
    }
    canonicalize_signs(&mut eigenvectors);
    let lambda_max_estimate = power_lambda_max(pair, inv_sqrt_mass, opts.seed)
        .max(eig.eigenvalues[order[n - 1]]);
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        mass: pair.mass.clone(),
        lambda_max_estimate,
    })
}

/// Tridiagonal QL with implicit shifts. `d` holds the diagonal, `e[i]` the
/// coupling between `i` and `i+1` (`e[n−1]` is ignored). On return `d` holds
/// the eigenvalues (unsorted) and, when given, the columns of `z` the
/// corresponding eigenvectors in the basis `z` started from.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut DMatrix<f64>>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(FlboError::Solver(
                    "tridiagonal QL iteration failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let signed_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zz) = z.as_deref_mut() {
                    for row in 0..zz.nrows() {
                        f = zz[(row, i + 1)];
                        zz[(row, i + 1)] = s * zz[(row, i)] + c * f;
                        zz[(row, i)] = c * zz[(row, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn lowest_ritz_values(alphas: &[f64], betas: &[f64], k: usize) -> Result<Vec<f64>> {
    let dim = alphas.len();
    let mut d = alphas.to_vec();
    let mut e = vec![0.0; dim];
    e[..dim - 1].copy_from_slice(&betas[..dim - 1]);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    d.truncate(k);
    Ok(d)
}

fn lanczos_eigensolve(
    pair: &OperatorPair,
    k: usize,
    inv_sqrt_mass: &DVector<f64>,
    opts: &EigenOptions,
) -> Result<SpectralBasis> {
    let n = pair.n();
    let lambda_max = power_lambda_max(pair, inv_sqrt_mass, opts.seed);
    let scale = lambda_max.max(f64::MIN_POSITIVE);
    let residual_tol = opts.residual_tol * scale;
    let stabilization_tol = 1e-11 * scale;
    let breakdown_tol = 1e-13 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // A single Krylov space carries at most one copy of each eigenspace, so
    // repeated eigenvalues are recovered by deflated restarts: every pass
    // runs a fresh Lanczos recursion kept orthogonal to all previously
    // accepted eigenvectors and contributes the lowest still-missing pairs.
    // Once k pairs are in hand, confirmation passes ask for the single
    // lowest remaining eigenvalue and the solve only finishes when that
    // value does not undercut the current k-th one, which guards against a
    // pass certifying a higher pair while a lower copy was still hiding.
    let mut values: Vec<f64> = Vec::new();
    let mut vectors: Vec<DVector<f64>> = Vec::new();
    let guard = 10.0 * residual_tol;
    let max_passes = 8 + 2 * k;
    let mut empty_passes = 0usize;
    let mut certified = false;
    for _ in 0..max_passes {
        if values.len() >= n {
            certified = true;
            break;
        }
        let needed = if values.len() < k { k - values.len() } else { 1 };
        let accepted = lanczos_pass(
            pair,
            inv_sqrt_mass,
            &vectors,
            needed,
            residual_tol,
            stabilization_tol,
            breakdown_tol,
            opts,
            &mut rng,
        )?;
        if accepted.is_empty() {
            empty_passes += 1;
            if empty_passes >= 2 {
                return Err(FlboError::Solver(format!(
                    "Lanczos stalled with {} of {k} eigenpairs converged",
                    values.len()
                )));
            }
            continue;
        }
        empty_passes = 0;
        let had_k = values.len() >= k;
        let kth_before = if had_k {
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            sorted[k - 1]
        } else {
            f64::INFINITY
        };
        let lowest_new = accepted
            .iter()
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min);
        for (value, vector) in accepted {
            values.push(value);
            vectors.push(vector);
        }
        if had_k && lowest_new >= kth_before - guard {
            certified = true;
            break;
        }
    }
    if !certified || values.len() < k {
        return Err(FlboError::Solver(format!(
            "Lanczos found {} of {k} eigenpairs within its restart budget",
            values.len()
        )));
    }
    finish_from_pairs(pair, inv_sqrt_mass, values, vectors, k, lambda_max)
}

/// One deflated Lanczos pass: builds a Krylov space orthogonal to
/// `deflation`, and returns every Ritz pair among the `needed` lowest whose
/// residual passes the tolerance (all of them at breakdown, where the space
/// is exactly invariant).
#[allow(clippy::too_many_arguments)]
fn lanczos_pass(
    pair: &OperatorPair,
    inv_sqrt_mass: &DVector<f64>,
    deflation: &[DVector<f64>],
    needed: usize,
    residual_tol: f64,
    stabilization_tol: f64,
    breakdown_tol: f64,
    opts: &EigenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let n = pair.n();
    let free = n - deflation.len();
    let max_dim = free.min(
        (opts.max_iter_factor.max(3) * needed)
            .max(2 * needed + 16)
            .max(128),
    );
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_dim);
    basis.push(fresh_direction(n, deflation, rng)?);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_dim);
    let mut betas: Vec<f64> = Vec::with_capacity(max_dim);
    let mut last_ritz: Option<Vec<f64>> = None;
    loop {
        let j = alphas.len();
        let vj = basis[j].clone();
        let mut w = apply_whitened(pair, inv_sqrt_mass, &vj);
        let alpha = vj.dot(&w);
        w.axpy(-alpha, &vj, 1.0);
        if j > 0 {
            w.axpy(-betas[j - 1], &basis[j - 1], 1.0);
        }
        // Two classical Gram-Schmidt passes against the deflated space and
        // the whole Krylov basis keep orthogonality at machine precision.
        for _ in 0..2 {
            for v in deflation {
                let overlap = v.dot(&w);
                w.axpy(-overlap, v, 1.0);
            }
            for v in &basis {
                let overlap = v.dot(&w);
                w.axpy(-overlap, v, 1.0);
            }
        }
        alphas.push(alpha);
        let beta = w.norm();
        let dim = alphas.len();
        let target = needed.min(dim);

        let finishing = dim == max_dim || beta <= breakdown_tol;
        let due = finishing || (dim >= needed.min(max_dim) && dim % CHECK_INTERVAL == 0);
        if due {
            let current = lowest_ritz_values(&alphas, &betas_padded(&betas, dim), target)?;
            let stable = match &last_ritz {
                Some(prev) => {
                    prev.len() == current.len()
                        && prev
                            .iter()
                            .zip(current.iter())
                            .all(|(a, b)| (a - b).abs() <= stabilization_tol)
                }
                None => false,
            };
            if stable || finishing {
                let mut d = alphas.clone();
                let mut e = betas_padded(&betas, dim);
                let mut z = DMatrix::identity(dim, dim);
                tridiagonal_ql(&mut d, &mut e, Some(&mut z))?;
                let mut order: Vec<usize> = (0..dim).collect();
                order.sort_by(|&p, &q| d[p].partial_cmp(&d[q]).unwrap_or(std::cmp::Ordering::Equal));
                let accepted: Vec<usize> = order
                    .iter()
                    .take(target)
                    .copied()
                    .filter(|&col| beta * z[(dim - 1, col)].abs() <= residual_tol)
                    .collect();
                if accepted.len() == target || finishing {
                    return build_ritz_pairs(&basis, &d, &z, &accepted);
                }
            }
            last_ritz = Some(current);
        }

        if beta <= breakdown_tol {
            unreachable!("breakdown is handled by the finishing branch");
        }
        betas.push(beta);
        basis.push(w / beta);
    }
}

/// Random start direction orthogonalized against the deflated eigenvectors.
fn fresh_direction(
    n: usize,
    deflation: &[DVector<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    for _ in 0..8 {
        let mut candidate = random_direction(n, rng);
        for _ in 0..2 {
            for v in deflation {
                let overlap = v.dot(&candidate);
                candidate.axpy(-overlap, v, 1.0);
            }
        }
        let norm = candidate.norm();
        if norm > 1e-8 {
            return Ok(candidate / norm);
        }
    }
    Err(FlboError::Solver(
        "could not draw a start direction outside the deflated eigenspace".into(),
    ))
}

fn build_ritz_pairs(
    basis: &[DVector<f64>],
    ritz_values: &[f64],
    z: &DMatrix<f64>,
    accepted: &[usize],
) -> Result<Vec<(f64, DVector<f64>)>> {
    let dim = ritz_values.len();
    let n = basis[0].len();
    let mut pairs = Vec::with_capacity(accepted.len());
    for &col in accepted {
        let mut y = DVector::zeros(n);
        for (i, v) in basis.iter().take(dim).enumerate() {
            y.axpy(z[(i, col)], v, 1.0);
        }
        let norm = y.norm();
        if norm <= 1e-300 {
            return Err(FlboError::Solver("degenerate Ritz vector".into()));
        }
        pairs.push((ritz_values[col], y / norm));
    }
    Ok(pairs)
}

fn betas_padded(betas: &[f64], dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[..dim - 1].copy_from_slice(&betas[..dim - 1]);
    e
}

fn finish_from_pairs(
    pair: &OperatorPair,
    inv_sqrt_mass: &DVector<f64>,
    values: Vec<f64>,
    vectors: Vec<DVector<f64>>,
    k: usize,
    lambda_max: f64,
) -> Result<SpectralBasis> {
    let n = pair.n();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&p, &q| values[p].partial_cmp(&values[q]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = DVector::from_fn(k, |i, _| values[order[i]]);
    let mut eigenvectors = DMatrix::zeros(n, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        for row in 0..n {
            eigenvectors[(row, col)] = vectors[idx][row] * inv_sqrt_mass[row];
        }
    }
    canonicalize_signs(&mut eigenvectors);
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        mass: pair.mass.clone(),
        lambda_max_estimate: lambda_max,
    })
}

/// Dense heat kernel matrix `h_t(x, y) = Σ_l e^{−tλ_l} φ_l(x) φ_l(y)`.
pub fn heat_kernel(basis: &SpectralBasis, t: f64) -> DMatrix<f64> {
    kernel_matrix(basis, |lambda| (-t * lambda).exp())
}

/// Dense time-averaged heat kernel with transfer `(1 − e^{−tλ})/λ`, which
/// tends to `t` on the null space.
pub fn time_averaged_heat_kernel(basis: &SpectralBasis, t: f64) -> DMatrix<f64> {
    let null_tol = RELATIVE_NULL_TOL * basis.lambda_max_estimate.max(1.0);
    kernel_matrix(basis, |lambda| {
        if lambda.abs() <= null_tol {
            t
        } else {
            -(-t * lambda).exp_m1() / lambda
        }
    })
}

fn kernel_matrix(basis: &SpectralBasis, transfer: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = basis.eigenvectors.clone();
    for (col, mut column) in scaled.column_iter_mut().enumerate() {
        column *= transfer(basis.eigenvalues[col]);
    }
    scaled * basis.eigenvectors.transpose()
}

/// Spectrally propagated heat flow `f(t) = Φ e^{−tΛ} ΦᵀS f₀`.
pub fn heat_propagate(basis: &SpectralBasis, f0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let mut coefficients = basis.project(f0)?;
    for (i, c) in coefficients.iter_mut().enumerate() {
        *c *= (-t * basis.eigenvalues[i]).exp();
    }
    basis.reconstruct(&coefficients)
}

/// Heat kernel signature columns: for each time `t`,
/// `hks_t(x) = Σ_l e^{−tλ_l} φ_l(x)²` over the computed part of the
/// spectrum. The result is `n × times.len()`.
pub fn finsler_hks(basis: &SpectralBasis, times: &[f64]) -> DMatrix<f64> {
    let n = basis.n();
    let mut out = DMatrix::zeros(n, times.len());
    for (col, &t) in times.iter().enumerate() {
        for l in 0..basis.k() {
            let decay = (-t * basis.eigenvalues[l]).exp();
            for row in 0..n {
                out[(row, col)] += decay * basis.eigenvectors[(row, l)].powi(2);
            }
        }
    }
    out
}

/// `count` logarithmically spaced times between `t_min` and `t_max`
/// inclusive.
pub fn log_spaced_times(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(t_max > t_min) || count < 2 {
        return Err(FlboError::Config(format!(
            "log-spaced times need 0 < t_min < t_max and count ≥ 2 (got {t_min}, {t_max}, {count})"
        )));
    }
    let log_min = t_min.ln();
    let step = (t_max.ln() - log_min) / (count - 1) as f64;
    let mut times: Vec<f64> = (0..count)
        .map(|i| (log_min + i as f64 * step).exp())
        .collect();
    times[0] = t_min;
    times[count - 1] = t_max;
    Ok(times)
}

/// A Chebyshev polynomial approximation of a spectral transfer function on
/// `[0, lambda_max]`; `h(λ) ≈ Σ_m c_m T_m(2λ/λ_max − 1)`.
#[derive(Clone, Debug)]
pub struct FilterSpec {
    pub coefficients: Vec<f64>,
    pub lambda_max: f64,
}

impl FilterSpec {
    /// Fits coefficients of order `order` (so `order + 1` of them) at the
    /// Chebyshev–Gauss nodes, where the discrete cosine orthogonality makes
    /// the fit exact for polynomials of degree ≤ `order`.
    pub fn fit(target: impl Fn(f64) -> f64, order: usize, lambda_max: f64) -> Result<Self> {
        if !(lambda_max > 0.0) {
            return Err(FlboError::Config(format!(
                "filter fit needs a positive spectral radius, got {lambda_max}"
            )));
        }
        let q = order + 1;
        let samples: Vec<(f64, f64)> = (0..q)
            .map(|i| {
                let angle = std::f64::consts::PI * (i as f64 + 0.5) / q as f64;
                let x = angle.cos();
                let lambda = (x + 1.0) * 0.5 * lambda_max;
                (angle, target(lambda))
            })
            .collect();
        let mut coefficients = Vec::with_capacity(q);
        for m in 0..q {
            let weight = if m == 0 { 1.0 } else { 2.0 };
            let sum: f64 = samples
                .iter()
                .map(|&(angle, y)| y * (m as f64 * angle).cos())
                .sum();
            coefficients.push(weight * sum / q as f64);
        }
        Ok(Self {
            coefficients,
            lambda_max,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Evaluates the fitted polynomial at a single eigenvalue.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        let x = 2.0 * lambda / self.lambda_max - 1.0;
        let mut t_prev = 1.0;
        let mut result = self.coefficients[0];
        if self.coefficients.len() == 1 {
            return result;
        }
        let mut t_curr = x;
        result += self.coefficients[1] * t_curr;
        for &c in &self.coefficients[2..] {
            let t_next = 2.0 * x * t_curr - t_prev;
            result += c * t_next;
            t_prev = t_curr;
            t_curr = t_next;
        }
        result
    }

    /// Largest deviation `|target(λ) − poly(λ)|` over a uniform grid on
    /// `[0, lambda_max]`.
    pub fn residual_against(&self, target: impl Fn(f64) -> f64, grid: usize) -> f64 {
        let grid = grid.max(2);
        (0..grid)
            .map(|i| {
                let lambda = self.lambda_max * i as f64 / (grid - 1) as f64;
                (target(lambda) - self.evaluate(lambda)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Applies the Chebyshev filter to a field matrix-free through the
/// three-term recurrence `T_{m+1}(L̃)f = 2L̃ T_m(L̃)f − T_{m−1}(L̃)f` with
/// `L̃ = 2L/λ_max − I`.
pub fn chebyshev_filter(
    pair: &OperatorPair,
    spec: &FilterSpec,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(pair.n(), f.len())?;
    if spec.coefficients.is_empty() {
        return Err(FlboError::Config("empty Chebyshev coefficient list".into()));
    }
    let shifted_apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = pair.laplacian_apply(v);
        out *= 2.0 / spec.lambda_max;
        out.axpy(-1.0, v, 1.0);
        out
    };
    let mut result = f * spec.coefficients[0];
    if spec.coefficients.len() == 1 {
        return Ok(result);
    }
    let mut t_prev = f.clone();
    let mut t_curr = shifted_apply(f);
    result.axpy(spec.coefficients[1], &t_curr, 1.0);
    for &c in &spec.coefficients[2..] {
        let mut t_next = shifted_apply(&t_curr);
        t_next *= 2.0;
        t_next.axpy(-1.0, &t_prev, 1.0);
        result.axpy(c, &t_next, 1.0);
        t_prev = t_curr;
        t_curr = t_next;
    }
    Ok(result)
}

/// Anisotropic convolution of a field with the heat transfer `e^{−tλ}` of a
/// single orientation's operator, applied matrix-free via a Chebyshev
/// filter.
pub fn anisotropic_convolve(
    pair: &OperatorPair,
    f: &DVector<f64>,
    t: f64,
    order: usize,
    lambda_max: f64,
) -> Result<DVector<f64>> {
    let spec = FilterSpec::fit(|lambda| (-t * lambda).exp(), order, lambda_max)?;
    chebyshev_filter(pair, &spec, f)
}

/// Directional-sum convolution over the operator family: the uniform
/// quadrature `(π/n) Σ_θ (h_t^θ ∗ f)` of the per-orientation convolutions
/// over the half turn `[0, π)`. `lambda_max` must upper-bound every member's
/// spectral radius.
pub fn directional_sum_convolve(
    pairs: &[&OperatorPair],
    f: &DVector<f64>,
    t: f64,
    order: usize,
    lambda_max: f64,
) -> Result<DVector<f64>> {
    if pairs.is_empty() {
        return Err(FlboError::Config(
            "directional sum needs at least one operator".into(),
        ));
    }
    let spec = FilterSpec::fit(|lambda| (-t * lambda).exp(), order, lambda_max)?;
    let mut sum = DVector::zeros(f.len());
    for pair in pairs {
        sum += chebyshev_filter(pair, &spec, f)?;
    }
    sum *= std::f64::consts::PI / pairs.len() as f64;
    Ok(sum)
}
