//! Time-domain reference solvers: the weak divergence as the gradient's
//! adjoint, implicit Euler against the spectral flow (including first-order
//! step convergence), source handling, the nonlinear Finsler right-hand
//! side, and the drift sweep where the simplified flux approaches it.

use approx::assert_relative_eq;
use flbo::diffusion::{
    divergence_of_field, implicit_euler_diffuse, nonlinear_finsler_rhs, omega_star_divergence,
    simplified_randers_rhs, simplified_randers_solve, DiffusionConfig,
};
use flbo::operator::{assemble_flbo, assemble_mass, AnisotropyParams, FaceMetricField};
use flbo::randers::{RandersMetric, SpdTensor};
use flbo::shapes::{flat_strip, icosphere, open_cylinder, regular_tetrahedron};
use flbo::spectral::{eigensolve, heat_propagate};
use flbo::FlboError;
use nalgebra::{DVector, Vector3};

fn seeded_field(n: usize, seed: u64) -> DVector<f64> {
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}

fn s_norm(mass: &DVector<f64>, v: &DVector<f64>) -> f64 {
    v.iter()
        .zip(mass.iter())
        .map(|(x, s)| x * x * s)
        .sum::<f64>()
        .sqrt()
}

fn isotropic() -> AnisotropyParams {
    AnisotropyParams::new(0.0, 0.0, 1).unwrap()
}

#[test]
fn weak_divergence_is_adjoint_to_the_face_gradient() {
    for mesh in [icosphere(2).unwrap(), flat_strip(8, 5, 2.0, 1.0).unwrap()] {
        let pair = assemble_flbo(&mesh, &isotropic(), 0.0).unwrap().pair;
        let f = seeded_field(mesh.n_vertices(), 3);
        let grads = mesh.face_gradient(f.as_slice()).unwrap();
        let div = divergence_of_field(&mesh, &grads).unwrap();
        let operator = -pair.laplacian_apply(&f);
        let scale = operator.amax().max(1e-12);
        assert!(
            (div - operator).amax() <= 1e-10 * scale,
            "divergence/gradient adjoint broken on a mesh with {} vertices",
            mesh.n_vertices()
        );
    }

    // A constant field is divergence-free at interior vertices of a planar
    // mesh.
    let strip = flat_strip(8, 5, 2.0, 1.0).unwrap();
    let mut on_boundary = vec![false; strip.n_vertices()];
    for edge in strip.edges() {
        if edge.is_boundary() {
            on_boundary[edge.vertices.0] = true;
            on_boundary[edge.vertices.1] = true;
        }
    }
    let constant = vec![Vector3::new(0.8, -0.4, 0.0); strip.n_faces()];
    let div = divergence_of_field(&strip, &constant).unwrap();
    let mut interior_seen = 0;
    for (i, &boundary) in on_boundary.iter().enumerate() {
        if !boundary {
            assert!(div[i].abs() <= 1e-12, "vertex {i}: divergence {}", div[i]);
            interior_seen += 1;
        }
    }
    assert!(interior_seen > 20);
}

#[test]
fn implicit_euler_tracks_the_spectral_flow() {
    let mesh = icosphere(1).unwrap();
    let pair = assemble_flbo(&mesh, &isotropic(), 0.0).unwrap().pair;
    let n = mesh.n_vertices();
    let basis = eigensolve(&pair, n).unwrap();
    let f0 = seeded_field(n, 5);
    let t = 0.1;

    let spectral = heat_propagate(&basis, &f0, t).unwrap();
    let stepped = implicit_euler_diffuse(
        &pair,
        &f0,
        &DiffusionConfig::new(t, 1000).unwrap(),
        None,
    )
    .unwrap();
    let rel = s_norm(&pair.mass, &(&stepped - &spectral)) / s_norm(&pair.mass, &spectral);
    assert!(rel <= 1e-3, "relative deviation {rel:.3e}");

    // Without a source the mass-weighted total is conserved to roundoff.
    let total = |v: &DVector<f64>| v.component_mul(&pair.mass).sum();
    assert_relative_eq!(total(&stepped), total(&f0), max_relative = 1e-12);

    // Zero time steps nowhere.
    let frozen =
        implicit_euler_diffuse(&pair, &f0, &DiffusionConfig::new(0.0, 1).unwrap(), None).unwrap();
    assert_eq!(frozen, f0);
}

#[test]
fn euler_error_decays_linearly_in_the_step_size() {
    let mesh = regular_tetrahedron().unwrap();
    let pair = assemble_flbo(&mesh, &isotropic(), 0.0).unwrap().pair;
    let basis = eigensolve(&pair, 4).unwrap();
    let f0 = seeded_field(4, 9);
    let t = 0.5;
    let reference = heat_propagate(&basis, &f0, t).unwrap();

    let steps = [10usize, 20, 40];
    let errors: Vec<f64> = steps
        .iter()
        .map(|&n| {
            let approx =
                implicit_euler_diffuse(&pair, &f0, &DiffusionConfig::new(t, n).unwrap(), None)
                    .unwrap();
            s_norm(&pair.mass, &(approx - &reference))
        })
        .collect();

    assert!(errors[0] > errors[1] && errors[1] > errors[2]);
    let xs: Vec<f64> = steps.iter().map(|&n| (t / n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / 3.0;
    let mean_y = ys.iter().sum::<f64>() / 3.0;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum::<f64>();
    assert!(
        (slope - 1.0).abs() <= 0.2,
        "first-order stepping should give slope 1, got {slope:.3} from errors {errors:?}"
    );
}

#[test]
fn simplified_solve_accumulates_the_time_averaged_source_response() {
    let mesh = regular_tetrahedron().unwrap();
    let params = AnisotropyParams::new(0.0, 0.1, 1).unwrap();
    let assembled = assemble_flbo(&mesh, &params, 0.0).unwrap();
    let basis = eigensolve(&assembled.pair, 4).unwrap();
    let f0 = seeded_field(4, 21);
    let t = 0.1;

    let closed_form =
        simplified_randers_solve(&mesh, &basis, &assembled.field, &f0, t).unwrap();
    let source = omega_star_divergence(&mesh, &assembled.field).unwrap();
    let stepped = implicit_euler_diffuse(
        &assembled.pair,
        &f0,
        &DiffusionConfig::new(t, 1000).unwrap(),
        Some(&source),
    )
    .unwrap();
    let rel = s_norm(&assembled.pair.mass, &(&stepped - &closed_form))
        / s_norm(&assembled.pair.mass, &closed_form).max(1e-12);
    assert!(rel <= 1e-3, "relative deviation {rel:.3e}");

    // At t = 0 the solve returns the initial field.
    let at_zero = simplified_randers_solve(&mesh, &basis, &assembled.field, &f0, 0.0).unwrap();
    assert!((&at_zero - &f0).amax() <= 1e-12);

    // Without drift the source vanishes and the solve is plain heat flow.
    let driftless = assemble_flbo(&mesh, &isotropic(), 0.0).unwrap();
    let basis = eigensolve(&driftless.pair, 4).unwrap();
    let solved = simplified_randers_solve(&mesh, &basis, &driftless.field, &f0, t).unwrap();
    let plain = heat_propagate(&basis, &f0, t).unwrap();
    assert!((solved - plain).amax() <= 1e-13);
}

#[test]
fn simplified_rhs_is_the_operator_action_plus_the_drift_divergence() {
    // With an isotropic base tensor the diffusivity is a per-face scalar
    // (D = I/α even with drift), where the edge-based stiffness and the weak
    // form of div(D∇u) coincide exactly; the identity then covers the drift
    // divergence as well.
    let mesh = open_cylinder(12, 5, 1.0, 2.0).unwrap();
    let params = AnisotropyParams::new(0.0, 0.3, 4).unwrap();
    let assembled = assemble_flbo(&mesh, &params, 0.7).unwrap();
    let u = seeded_field(mesh.n_vertices(), 31);

    let rhs = simplified_randers_rhs(&mesh, &assembled.field, &u).unwrap();
    let operator_part = -assembled.pair.laplacian_apply(&u);
    let drift_part = omega_star_divergence(&mesh, &assembled.field).unwrap();
    let expected = operator_part + drift_part;
    let scale = expected.amax().max(1e-12);
    assert!(
        (rhs - expected).amax() <= 1e-10 * scale,
        "weak-form flux disagrees with the assembled stiffness"
    );
}

#[test]
fn stiffness_weak_form_uses_the_in_plane_adjugate_of_the_diffusivity() {
    // The edge-based weights take D-inner products of edge vectors, while the
    // Galerkin weak form pairs gradients, which are edges rotated by 90° in
    // the face plane. Conjugating a symmetric in-plane tensor X by that
    // rotation gives tr(X)·P − X, so the assembled stiffness acts as the weak
    // form of div(D̂∇u) with D̂ the in-plane adjugate of D.
    let mesh = open_cylinder(12, 5, 1.0, 2.0).unwrap();
    let params = AnisotropyParams::new(10.0, 0.0, 4).unwrap();
    let assembled = assemble_flbo(&mesh, &params, 0.7).unwrap();
    let u = seeded_field(mesh.n_vertices(), 31);

    let grads = mesh.face_gradient(u.as_slice()).unwrap();
    let flux: Vec<Vector3<f64>> = grads
        .iter()
        .enumerate()
        .map(|(f, g)| {
            let normal = mesh.face_normal(f);
            let projector = nalgebra::Matrix3::identity() - normal * normal.transpose();
            let in_plane =
                projector * assembled.field.per_face[f].diffusivity.matrix() * projector;
            let adjugate = projector * in_plane.trace() - in_plane;
            adjugate * g
        })
        .collect();
    let weak = divergence_of_field(&mesh, &flux).unwrap();
    let operator = -assembled.pair.laplacian_apply(&u);
    let scale = operator.amax().max(1e-12);
    assert!(
        (weak - operator).amax() <= 1e-10 * scale,
        "adjugate weak form disagrees with the assembled stiffness"
    );
}

#[test]
fn nonlinear_rhs_reduces_to_the_linear_flux_without_drift() {
    let mesh = icosphere(1).unwrap();
    let tensor = SpdTensor::new(nalgebra::Matrix3::from_diagonal(&Vector3::new(
        2.0, 1.0, 0.5,
    )))
    .unwrap();
    let metrics =
        vec![RandersMetric::new(tensor, Vector3::zeros()).unwrap(); mesh.n_faces()];
    let field = FaceMetricField::from_metrics(metrics, 0.0).unwrap();
    let u = seeded_field(mesh.n_vertices(), 41);

    let (nonlinear, flagged) = nonlinear_finsler_rhs(&mesh, &field, &u).unwrap();
    assert!(flagged.is_empty());
    let linear = simplified_randers_rhs(&mesh, &field, &u).unwrap();
    let scale = linear.amax().max(1e-12);
    assert!(
        (&nonlinear - &linear).amax() <= 1e-12 * scale.max(1.0),
        "flux forms disagree without drift"
    );

    // The driftless nonlinear flux is 1-homogeneous in the field.
    let (doubled, _) = nonlinear_finsler_rhs(&mesh, &field, &(&u * 2.0)).unwrap();
    assert!((doubled - &nonlinear * 2.0).amax() <= 1e-11 * scale.max(1.0));
}

#[test]
fn nonlinear_rhs_flags_vanishing_gradients() {
    let mesh = regular_tetrahedron().unwrap();
    let metrics =
        vec![RandersMetric::new(SpdTensor::identity(), Vector3::zeros()).unwrap(); 4];
    let field = FaceMetricField::from_metrics(metrics, 0.0).unwrap();

    let constant = DVector::from_element(4, 3.5);
    let (rhs, flagged) = nonlinear_finsler_rhs(&mesh, &field, &constant).unwrap();
    assert_eq!(flagged, vec![0, 1, 2, 3]);
    assert!(rhs.amax() <= 1e-15);

    // An impulse at vertex 0 leaves exactly the opposite face gradient-free.
    let impulse = DVector::from_fn(4, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let (_, flagged) = nonlinear_finsler_rhs(&mesh, &field, &impulse).unwrap();
    let untouched: Vec<usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(_, tri)| !tri.contains(&0))
        .map(|(f, _)| f)
        .collect();
    assert_eq!(flagged, untouched);
}

#[test]
fn simplification_gap_shrinks_superlinearly_with_the_drift() {
    let mesh = flat_strip(30, 10, 3.0, 1.0).unwrap();
    let mass = assemble_mass(&mesh);
    let epsilons = [0.1, 0.05, 0.025];
    let mut gaps = Vec::new();
    for &eps in &epsilons {
        let metrics: Vec<RandersMetric> = (0..mesh.n_faces())
            .map(|_| {
                RandersMetric::new(SpdTensor::identity(), Vector3::new(eps, 0.0, 0.0)).unwrap()
            })
            .collect();
        let field = FaceMetricField::from_metrics(metrics, 0.0).unwrap();
        // Scaled so the dual norm of the gradient is exactly 1.
        let u0 = DVector::from_iterator(
            mesh.n_vertices(),
            mesh.vertices().iter().map(|p| (1.0 + eps) * p.x),
        );
        let (nonlinear, flagged) = nonlinear_finsler_rhs(&mesh, &field, &u0).unwrap();
        assert!(flagged.is_empty());
        let simplified = simplified_randers_rhs(&mesh, &field, &u0).unwrap();
        gaps.push(s_norm(&mass, &(nonlinear - simplified)));
    }

    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gaps {gaps:?}");
    let slope = ((gaps[0] / gaps[2]).ln()) / ((epsilons[0] / epsilons[2]).ln());
    assert!(
        slope > 1.0,
        "gap must shrink superlinearly in the drift: slope {slope:.4}, gaps {gaps:?}"
    );
}

#[test]
fn solvers_reject_mismatched_dimensions() {
    let mesh = regular_tetrahedron().unwrap();
    let pair = assemble_flbo(&mesh, &isotropic(), 0.0).unwrap().pair;

    let short = seeded_field(3, 1);
    assert!(matches!(
        implicit_euler_diffuse(&pair, &short, &DiffusionConfig::new(0.1, 10).unwrap(), None),
        Err(FlboError::Config(_))
    ));

    let f0 = seeded_field(4, 1);
    assert!(matches!(
        implicit_euler_diffuse(
            &pair,
            &f0,
            &DiffusionConfig::new(0.1, 10).unwrap(),
            Some(&short)
        ),
        Err(FlboError::Config(_))
    ));

    assert!(DiffusionConfig::new(-0.1, 10).is_err());
    assert!(DiffusionConfig::new(0.1, 0).is_err());

    let metrics =
        vec![RandersMetric::new(SpdTensor::identity(), Vector3::zeros()).unwrap(); 2];
    let field = FaceMetricField::from_metrics(metrics, 0.0).unwrap();
    assert!(matches!(
        nonlinear_finsler_rhs(&mesh, &field, &f0),
        Err(FlboError::MalformedInput(_))
    ));
    assert!(matches!(
        simplified_randers_rhs(&mesh, &field, &f0),
        Err(FlboError::MalformedInput(_))
    ));
}
