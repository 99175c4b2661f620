//! Discretisation errors against analytic derivatives and closed forms.

use std::f64::consts::PI;
use std::sync::Arc;

use linfid_core::calculus::{diff, highest_seminorm_sq, lp_norm_normalised};
use linfid_core::operators::{eval_f, fully_nonlinear_eps};
use linfid_core::{Grid, Interval};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(m: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&[Interval::new(0.0, 1.0); 2], &[m, m]).unwrap())
}

fn ratios(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| w[0] / w[1]).collect()
}

/// Interior ratios pinned near 4, overall ratios at least 3.5.
fn check_order(errs: &[(f64, f64)]) {
    let inner: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let all: Vec<f64> = errs.iter().map(|e| e.1).collect();
    for r in ratios(&inner) {
        assert!((3.5..=4.5).contains(&r), "interior errors {inner:?}");
    }
    for r in ratios(&all) {
        assert!(r >= 3.5, "errors {all:?}");
    }
}

fn max_errors(g: &Grid, err: impl Fn(usize) -> f64) -> (f64, f64) {
    let inner = g.interior_nodes().map(&err).fold(0.0, f64::max);
    let all = (0..g.len()).map(&err).fold(0.0, f64::max);
    (inner, all)
}

#[test]
fn second_derivative_of_sine_product_is_second_order() {
    let errs: Vec<(f64, f64)> = [17, 33, 65]
        .iter()
        .map(|&m| {
            let g = square(m);
            let u = g.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
            let d2 = diff(&u, 2).unwrap();
            max_errors(&g, |i| {
                (d2.component(i, &[0, 0]) + PI * PI * u.values()[i]).abs()
            })
        })
        .collect();
    check_order(&errs);
}

#[test]
fn fully_nonlinear_source_matches_symbolic_evaluation() {
    let eps = 0.1;
    let op = fully_nonlinear_eps(eps).unwrap();
    let errs: Vec<(f64, f64)> = [17, 33, 65]
        .iter()
        .map(|&m| {
            let g = square(m);
            let u = g.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
            let f = eval_f(&op, &u).unwrap();
            max_errors(&g, |i| {
                let [x, y] = g.coords(i);
                let (sx, sy, cx, cy) = (
                    (PI * x).sin(),
                    (PI * y).sin(),
                    (PI * x).cos(),
                    (PI * y).cos(),
                );
                let (uxx, uyy, uxy) = (-PI * PI * sx * sy, -PI * PI * sx * sy, PI * PI * cx * cy);
                let exact =
                    uxx + uyy + eps * (1.0 + uxx * uxx + uyy * uyy + 2.0 * uxy * uxy).sqrt();
                (f.values()[i] - exact).abs()
            })
        })
        .collect();
    check_order(&errs);
}

#[test]
fn quartic_seminorm_is_576() {
    for m in [9, 17] {
        let g = square(m);
        let u = g.sample(|x| x[0].powi(4));
        let s = highest_seminorm_sq(&u).unwrap();
        assert!((s - 576.0).abs() < 1e-6 * 576.0, "m={m}: {s}");
    }
}

#[test]
fn p64_norm_gap_to_max() {
    let g = square(33);
    let n = g.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for _ in 0..20 {
        let f: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let max = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lp = lp_norm_normalised(&f, g.weights(), 64.0).unwrap();
        let gap = (max - lp) / max;
        assert!((0.0..=n.ln() / 64.0).contains(&gap), "gap {gap}");
    }
}
