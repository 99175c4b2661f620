//! Adjoint-assembled gradient against central finite differences of the energy.

use std::sync::Arc;

use linfid_core::functional::{energy_p, gradient_p, ProblemData, RegularisationParams};
use linfid_core::operators::{
    fully_nonlinear_eps, laplacian, linear_divergence, linear_nondivergence, obs_flux,
    obs_identity, OperatorF, OperatorK,
};
use linfid_core::{Grid, Interval, MeasurementSet, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smooth_random(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, amp: f64) -> Vec<f64> {
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.0..6.0),
            )
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            amp * modes
                .iter()
                .map(|(c, kx, ky, ph)| c * (kx * x[0] + ph).sin() * (ky * x[1]).cos())
                .sum::<f64>()
                + 0.01 * amp * rng.gen_range(-1.0..1.0)
        })
        .collect()
}

fn check(op_f: Arc<dyn OperatorF>, op_k: Arc<dyn OperatorK>, ks_kind: usize) {
    let grid = Arc::new(Grid::new(&[Interval::new(0.0, 1.0); 2], &[17, 17]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ks = match ks_kind {
        0 => MeasurementSet::region(
            &grid,
            &[Interval::new(0.25, 0.75), Interval::new(0.25, 0.75)],
        ),
        1 => MeasurementSet::segment(&grid, &[0.125, 0.5], &[0.875, 0.5]),
        _ => MeasurementSet::points(&grid, &[vec![0.25, 0.25], vec![0.5, 0.75], vec![0.0, 0.5]]),
    }
    .unwrap();
    let g = ScalarField::new(Arc::clone(&grid), smooth_random(&grid, &mut rng, 0.3)).unwrap();
    let obs: Vec<f64> = (0..ks.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let data = ProblemData::new(op_f, op_k, ks, g.clone(), obs).unwrap();
    let params = RegularisationParams::new(0.05, 1e-5, 0.0, vec![4.0, 16.0], 2).unwrap();

    for p in [4.0, 16.0] {
        for _ in 0..20 {
            let u = ScalarField::new(Arc::clone(&grid), smooth_random(&grid, &mut rng, 1.0))
                .unwrap()
                .with_boundary_of(&g);
            let mut phi = smooth_random(&grid, &mut rng, 1.0);
            for i in grid.boundary_nodes() {
                phi[i] = 0.0;
            }
            let grad = gradient_p(&u, &params, &data, p).unwrap();
            let analytic: f64 = grad.iter().zip(&phi).map(|(a, b)| a * b).sum();
            let eps = 1e-6;
            let shift = |s: f64| {
                let vals = u
                    .values()
                    .iter()
                    .zip(&phi)
                    .map(|(a, b)| a + s * b)
                    .collect();
                energy_p(
                    &ScalarField::new(Arc::clone(&grid), vals).unwrap(),
                    &params,
                    &data,
                    p,
                )
                .unwrap()
            };
            let fd = (shift(eps) - shift(-eps)) / (2.0 * eps);
            let rel = (analytic - fd).abs() / fd.abs().max(analytic.abs());
            assert!(
                rel <= 1e-5,
                "p={p}: analytic {analytic}, fd {fd}, rel {rel}"
            );
        }
    }
}

#[test]
fn laplacian_identity_region() {
    check(Arc::new(laplacian(2).unwrap()), Arc::new(obs_identity()), 0);
}

#[test]
fn divergence_flux_segment() {
    check(
        Arc::new(linear_divergence(&[1.5, 0.3, 0.3, 0.8], &[0.5, -0.2], -0.4).unwrap()),
        Arc::new(obs_flux(&[0.3, -0.6]).unwrap()),
        1,
    );
}

#[test]
fn nondivergence_identity_points() {
    check(
        Arc::new(linear_nondivergence(&[1.0, -0.2, -0.2, 2.0], &[1.0, 0.0], 0.5).unwrap()),
        Arc::new(obs_identity()),
        2,
    );
}

#[test]
fn fully_nonlinear_flux_region() {
    check(
        Arc::new(fully_nonlinear_eps(0.25).unwrap()),
        Arc::new(obs_flux(&[0.2, 0.4]).unwrap()),
        0,
    );
}

/// With only the viscosity term active the gradient is the quadratic form
/// `beta * D^T W D`, so `<grad(u), u - g> = beta * ||D^{n̄}(u - g)||^2` when
/// `g` has vanishing top-order derivatives.
#[test]
fn viscosity_quadratic_form_identity() {
    let grid = Arc::new(Grid::new(&[Interval::new(0.0, 1.0); 2], &[17, 17]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = grid.sample(|x| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[1]);
    let u = ScalarField::new(Arc::clone(&grid), smooth_random(&grid, &mut rng, 1.0))
        .unwrap()
        .with_boundary_of(&g);
    // huge measurement tolerance and alpha -> 0 isolate the viscosity term
    let ks = MeasurementSet::points(&grid, &[vec![0.5, 0.5]]).unwrap();
    let obs = linfid_core::operators::eval_k(&obs_identity(), &u, &ks).unwrap();
    let data = ProblemData::new(
        Arc::new(laplacian(2).unwrap()),
        Arc::new(obs_identity()),
        ks,
        g.clone(),
        obs,
    )
    .unwrap();
    let beta = 0.7;
    let params = RegularisationParams::new(1e-300, beta, 0.0, vec![4.0], 2).unwrap();
    let grad = gradient_p(&u, &params, &data, 4.0).unwrap();
    let diff: Vec<f64> = u
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a - b)
        .collect();
    let lhs: f64 = grad.iter().zip(&diff).map(|(a, b)| a * b).sum();
    let dfield = ScalarField::new(Arc::clone(&grid), diff).unwrap();
    let rhs = beta * linfid_core::calculus::highest_seminorm_sq(&dfield).unwrap();
    assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs(), "{lhs} vs {rhs}");
}
