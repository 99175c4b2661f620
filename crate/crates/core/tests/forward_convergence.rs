//! Manufactured-solution recovery and second-order convergence of the forward solver.

use std::sync::Arc;

use linfid_core::forward::{solve_dirichlet, Manufactured};
use linfid_core::operators::{eval_f, fully_nonlinear_eps, laplacian, OperatorF};
use linfid_core::{Grid, Interval, ScalarField};

fn unit(m: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&[Interval::new(0.0, 1.0); 2], &[m, m]).unwrap())
}

fn recovery_error(op: &dyn OperatorF, m: usize) -> f64 {
    let grid = unit(m);
    let exact = Manufactured::SinProduct.sample(&grid);
    let f = Manufactured::SinProduct.analytic_source(&grid, op);
    let sol = solve_dirichlet(op, &f, &ScalarField::zeros(Arc::clone(&grid)), 1e-10, 50).unwrap();
    assert!(sol.converged(), "{:?}", sol.status);
    sol.u.max_abs_diff(&exact)
}

#[test]
fn second_order_under_refinement() {
    let ops: [Box<dyn OperatorF>; 2] = [
        Box::new(laplacian(2).unwrap()),
        Box::new(fully_nonlinear_eps(0.25).unwrap()),
    ];
    for op in &ops {
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&m| recovery_error(op.as_ref(), m))
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (3.5..=4.5).contains(&ratio),
                "{}: errors {errs:?}",
                op.name()
            );
        }
    }
}

#[test]
fn discrete_round_trip_is_exact() {
    let grid = unit(17);
    let op = fully_nonlinear_eps(0.5).unwrap();
    let u0 = Manufactured::GaussianBump.sample(&grid);
    let f = eval_f(&op, &u0).unwrap();
    let start = ScalarField::zeros(Arc::clone(&grid)).with_boundary_of(&u0);
    let sol = solve_dirichlet(&op, &f, &start, 1e-10, 30).unwrap();
    assert!(sol.converged());
    assert!(sol.u.max_abs_diff(&u0) < 1e-9);
}
