use std::sync::Arc;

use linfid_core::functional::{gradient_p, ProblemData, RegularisationParams};
use linfid_core::measures::{
    collar, concentration_fraction, density_mu_p, density_nu_p, el_pairing, el_residual,
    essential_limsup, test_functions, TestFunction, TestKind,
};
use linfid_core::operators::{
    fully_nonlinear_eps, laplacian, linear_divergence, obs_flux, obs_identity, OperatorF, OperatorK,
};
use linfid_core::{Grid, Interval, MeasurementSet, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(m: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&[Interval::new(0.0, 1.0); 2], &[m, m]).unwrap())
}

fn wavy(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            c[0] * (2.0 * x[0] + c[1]).sin() * (3.0 * x[1]).cos()
                + c[2] * x[0] * x[1]
                + c[3] * (4.0 * x[1] + c[4]).sin()
                + c[5] * x[0] * x[0]
        })
        .collect()
}

#[test]
fn two_point_concentration_against_direct_formula() {
    let g = square(9);
    let ks = MeasurementSet::points(&g, &[vec![0.25, 0.5], vec![0.75, 0.5]]).unwrap();
    let errors = [1.0, 0.5];
    let data = ProblemData::new(
        Arc::new(laplacian(2).unwrap()),
        Arc::new(obs_identity()),
        ks,
        ScalarField::zeros(Arc::clone(&g)),
        errors.iter().map(|e| -e).collect(),
    )
    .unwrap();
    let u = ScalarField::zeros(Arc::clone(&g));
    let p: f64 = 16.0;
    let nu = density_nu_p(&u, &data, p).unwrap();
    let cf = concentration_fraction(&nu, &errors, 0.1).unwrap();

    let s: Vec<f64> = errors
        .iter()
        .map(|e: &f64| (e * e + 1.0 / (p * p)).sqrt())
        .collect();
    let a: Vec<f64> = s
        .iter()
        .zip(&errors)
        .map(|(s, e)| s.powf(p - 2.0) * e)
        .collect();
    let expected = a[0] / (a[0] + a[1]);
    assert!((cf - expected).abs() < 1e-14, "{cf} vs {expected}");
    assert!(cf > 0.9999);
    assert_eq!(concentration_fraction(&nu, &[0.3, 0.3], 0.0).unwrap(), 1.0);
}

fn check_pairing(op_f: Arc<dyn OperatorF>, op_k: Arc<dyn OperatorK>, seed: u64) {
    let g = square(17);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks = MeasurementSet::region(&g, &[Interval::new(0.25, 0.75), Interval::new(0.5, 0.875)])
        .unwrap();
    let boundary = ScalarField::new(Arc::clone(&g), wavy(&g, &mut rng)).unwrap();
    let obs = (0..ks.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let data = ProblemData::new(op_f, op_k, ks, boundary.clone(), obs).unwrap();
    let params = RegularisationParams::new(0.05, 1e-5, 0.0, vec![4.0, 16.0], 2).unwrap();
    for p in [4.0, 16.0] {
        for _ in 0..5 {
            let u = ScalarField::new(Arc::clone(&g), wavy(&g, &mut rng))
                .unwrap()
                .with_boundary_of(&boundary);
            let nu = density_nu_p(&u, &data, p).unwrap();
            let mu = density_mu_p(&u, &data, p).unwrap();
            let grad = gradient_p(&u, &params, &data, p).unwrap();
            let mut phi = wavy(&g, &mut rng);
            for i in g.boundary_nodes() {
                phi[i] = 0.0;
            }
            let inner: f64 = grad.iter().zip(&phi).map(|(a, b)| a * b).sum();
            let pair = el_pairing(&u, &mu, &nu, &params, &data, &phi).unwrap();
            assert!(
                (pair - inner).abs() <= 1e-10 * inner.abs().max(1e-300),
                "{pair} vs {inner}"
            );

            // witness: the gradient itself, cut off on the collar
            let col = collar(&g);
            let witness: Vec<f64> = grad
                .iter()
                .zip(&col)
                .map(|(v, &c)| if c { 0.0 } else { *v })
                .collect();
            let l1: f64 = witness.iter().map(|v| v.abs()).sum();
            let sq: f64 = witness.iter().map(|v| v * v).sum();
            let t = TestFunction {
                seed: 0,
                kind: TestKind::PolynomialBump,
                values: witness,
            };
            let res = el_residual(&u, &mu, &nu, &params, &data, &[t]).unwrap();
            assert!(res > 0.0);
            assert!((res - sq / l1).abs() <= 1e-10 * res);
            let sup = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tests = test_functions(&g, 10, seed);
            assert!(
                el_residual(&u, &mu, &nu, &params, &data, &tests).unwrap() <= sup * (1.0 + 1e-12)
            );
        }
    }
}

#[test]
fn pairing_equals_gradient_laplacian() {
    check_pairing(Arc::new(laplacian(2).unwrap()), Arc::new(obs_identity()), 1);
}

#[test]
fn pairing_equals_gradient_divergence_flux() {
    check_pairing(
        Arc::new(linear_divergence(&[1.0, 0.2, 0.2, 2.0], &[0.4, 0.1], -1.0).unwrap()),
        Arc::new(obs_flux(&[0.5, -0.5]).unwrap()),
        2,
    );
}

#[test]
fn pairing_equals_gradient_fully_nonlinear() {
    check_pairing(
        Arc::new(fully_nonlinear_eps(0.25).unwrap()),
        Arc::new(obs_flux(&[-0.2, 0.3]).unwrap()),
        3,
    );
}

#[test]
fn limsup_of_lipschitz_field_on_subdomain() {
    let g = square(33);
    let ks = MeasurementSet::region(&g, &[Interval::new(0.25, 0.75), Interval::new(0.25, 0.75)])
        .unwrap();
    let lip = 3.0;
    let f: Vec<f64> = ks
        .nodes()
        .iter()
        .map(|&i| {
            let x = g.coords(i);
            lip * (x[0] - 0.4).abs()
        })
        .collect();
    let h = g.spacing()[0];
    let radii = [4.0 * h, 2.0 * h, h, 0.5 * h];
    for (j, &node) in ks.nodes().iter().enumerate().step_by(7) {
        let star = essential_limsup(&g, ks.nodes(), ks.weights(), &f, node, &radii).unwrap();
        assert!((star - f[j]).abs() <= lip * h, "node {node}");
    }
    // outside the carrier the first nonempty ball decides
    let off = g.ravel([6, 6]);
    let star = essential_limsup(&g, ks.nodes(), ks.weights(), &f, off, &radii).unwrap();
    let x = g.coords(g.ravel([8, 8]));
    assert!((star - lip * (x[0] - 0.4).abs()).abs() <= 2.0 * lip * h);
}
