//! Newton solver for the Dirichlet problem `F[u] = f` in the domain, `u = g` on
//! the boundary, manufactured solutions, and synthetic noisy measurements.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::calculus::slots;
use crate::error::{Error, Result};
use crate::grid::{Grid, MeasurementSet, ScalarField, MAX_DIM};
use crate::operators::{
    eval_f, eval_k, is_spd, jets2, pair_of, Jet2, Matrix, OperatorF, OperatorK, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardStatus {
    Converged,
    MaxIterations,
    /// Damping could not reduce the residual.
    Stalled,
    /// `F_X` lost positive definiteness at some interior node.
    Indefinite,
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub u: ScalarField,
    pub iterations: usize,
    /// `max |F[u] - f|` over interior nodes, per Newton iterate (initial guess first).
    pub residuals: Vec<f64>,
    pub status: ForwardStatus,
}

impl ForwardSolution {
    pub fn converged(&self) -> bool {
        self.status == ForwardStatus::Converged
    }

    pub fn residual(&self) -> f64 {
        *self
            .residuals
            .last()
            .expect("at least the initial residual")
    }
}

/// `(column, weight)` pairs of the row of `D^counts` at `node`.
pub(crate) fn derivative_row(
    grid: &Grid,
    node: usize,
    counts: [usize; MAX_DIM],
) -> Vec<(usize, f64)> {
    let ij = grid.unravel(node);
    let axis_row = |a: usize| -> Vec<(usize, f64)> {
        if a >= grid.dim() || counts[a] == 0 {
            vec![(ij[a], 1.0)]
        } else {
            let (start, w) = grid.stencil(a, counts[a]).row(ij[a]);
            w.iter().enumerate().map(|(k, &c)| (start + k, c)).collect()
        }
    };
    let (rx, ry) = (axis_row(0), axis_row(1));
    let mut out = Vec::with_capacity(rx.len() * ry.len());
    for &(j, wy) in &ry {
        for &(i, wx) in &rx {
            out.push((grid.ravel([i, j]), wx * wy));
        }
    }
    out
}

fn interior_residual(grid: &Grid, fu: &ScalarField, f: &ScalarField) -> (Vec<f64>, f64) {
    let mut r = vec![0.0; grid.len()];
    let mut sup: f64 = 0.0;
    for i in grid.interior_nodes() {
        r[i] = fu.values()[i] - f.values()[i];
        sup = sup.max(r[i].abs());
    }
    (r, sup)
}

/// Newton iteration from the initial guess `g` (whose boundary values are kept).
pub fn solve_dirichlet(
    op: &dyn OperatorF,
    f: &ScalarField,
    g: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<ForwardSolution> {
    if !f.same_grid(g) {
        return Err(Error::Mismatch(
            "source and boundary data on different grids".into(),
        ));
    }
    let grid = Arc::clone(g.grid());
    let n = grid.dim();
    let band = grid.resolution()[0] + 1;
    let mut u = g.clone();
    let (mut res, mut sup) = interior_residual(&grid, &eval_f(op, &u)?, f);
    let mut residuals = vec![sup];
    let mut iterations = 0;

    loop {
        if sup <= tol {
            return Ok(ForwardSolution {
                u,
                iterations,
                residuals,
                status: ForwardStatus::Converged,
            });
        }
        if iterations >= max_iter {
            return Ok(ForwardSolution {
                u,
                iterations,
                residuals,
                status: ForwardStatus::MaxIterations,
            });
        }
        let jets = jets2(&u);
        let mut jac = BandMatrix::zeros(grid.len(), band, band);
        let mut rhs = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            if grid.is_boundary(i) {
                jac.add(i, i, 1.0);
                continue;
            }
            let q = op.partials(&jets[i]);
            if !is_spd(&q.hess, n) {
                return Ok(ForwardSolution {
                    u,
                    iterations,
                    residuals,
                    status: ForwardStatus::Indefinite,
                });
            }
            rhs[i] = -res[i];
            jac.add(i, i, q.r);
            for (counts, _) in slots(n, 1) {
                let a = if counts[0] == 1 { 0 } else { 1 };
                push_row(&mut jac, &grid, i, counts, q.p[a]);
            }
            for (counts, mult) in slots(n, 2) {
                let (a, b) = pair_of(counts, n);
                push_row(&mut jac, &grid, i, counts, mult * q.hess[a][b]);
            }
        }
        jac.solve(&mut rhs)?;

        let mut step = 1.0;
        loop {
            let mut trial = u.clone();
            for (t, d) in trial.values_mut().iter_mut().zip(&rhs) {
                *t += step * d;
            }
            let (r_try, s_try) = interior_residual(&grid, &eval_f(op, &trial)?, f);
            if s_try < sup {
                u = trial;
                res = r_try;
                sup = s_try;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return Ok(ForwardSolution {
                    u,
                    iterations,
                    residuals,
                    status: ForwardStatus::Stalled,
                });
            }
        }
        iterations += 1;
        residuals.push(sup);
    }
}

fn push_row(jac: &mut BandMatrix, grid: &Grid, i: usize, counts: [usize; MAX_DIM], coef: f64) {
    if coef == 0.0 {
        return;
    }
    for (col, w) in derivative_row(grid, i, counts) {
        if !grid.is_boundary(col) {
            jac.add(i, col, coef * w);
        }
    }
}

/// `k^gamma = K[u0] + eta`, `eta` uniform on `[-gamma, gamma]` from a seeded ChaCha8 stream.
pub fn synth_data(
    u0: &ScalarField,
    op: &dyn OperatorK,
    ks: &MeasurementSet,
    gamma: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Param {
            name: "gamma",
            reason: format!("{gamma} must be non-negative"),
        });
    }
    let clean = eval_k(op, u0, ks)?;
    if gamma == 0.0 {
        return Ok(clean);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(clean
        .into_iter()
        .map(|k| k + rng.gen_range(-gamma..=gamma))
        .collect())
}

/// Closed-form test solutions with analytic first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manufactured {
    /// `prod_a sin(pi x_a)`; vanishes on the boundary of the unit cube.
    SinProduct,
    /// `exp(-|x - c|^2 / 0.08)` with `c` the centre of the unit cube.
    GaussianBump,
    /// `sum_a x_a^2`.
    Quadratic,
    /// Zero function.
    Zero,
}

impl Manufactured {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin_product" => Some(Self::SinProduct),
            "gaussian_bump" => Some(Self::GaussianBump),
            "quadratic" => Some(Self::Quadratic),
            "zero" => Some(Self::Zero),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::SinProduct => "sin_product",
            Self::GaussianBump => "gaussian_bump",
            Self::Quadratic => "quadratic",
            Self::Zero => "zero",
        }
    }

    /// `(u, Du, D^2u)` at `x` in dimension `x.len()`.
    pub fn jet(&self, x: &[f64]) -> (f64, Vector, Matrix) {
        let n = x.len();
        let mut p = Vector::default();
        let mut h = Matrix::default();
        match self {
            Self::SinProduct => {
                let s: Vec<f64> = x.iter().map(|&t| (PI * t).sin()).collect();
                let c: Vec<f64> = x.iter().map(|&t| (PI * t).cos()).collect();
                let prod_except = |skip: &[usize]| -> f64 {
                    (0..n).filter(|k| !skip.contains(k)).map(|k| s[k]).product()
                };
                let u: f64 = s.iter().product();
                for a in 0..n {
                    p[a] = PI * c[a] * prod_except(&[a]);
                    for b in 0..n {
                        h[a][b] = if a == b {
                            -PI * PI * u
                        } else {
                            PI * PI * c[a] * c[b] * prod_except(&[a, b])
                        };
                    }
                }
                (u, p, h)
            }
            Self::GaussianBump => {
                let w = 0.08;
                let d: Vec<f64> = x.iter().map(|&t| t - 0.5).collect();
                let r2: f64 = d.iter().map(|v| v * v).sum();
                let u = (-r2 / w).exp();
                for a in 0..n {
                    p[a] = -2.0 * d[a] / w * u;
                    for b in 0..n {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        h[a][b] = (4.0 * d[a] * d[b] / (w * w) - 2.0 * delta / w) * u;
                    }
                }
                (u, p, h)
            }
            Self::Quadratic => {
                let u = x.iter().map(|t| t * t).sum();
                for a in 0..n {
                    p[a] = 2.0 * x[a];
                    h[a][a] = 2.0;
                }
                (u, p, h)
            }
            Self::Zero => (0.0, p, h),
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> ScalarField {
        grid.sample(|x| self.jet(x).0)
    }

    /// `F(x, u, Du, D^2u)` from the analytic derivatives.
    pub fn analytic_source(&self, grid: &Arc<Grid>, op: &dyn OperatorF) -> ScalarField {
        grid.sample(|x| {
            let (r, p, hess) = self.jet(x);
            let mut xs = [0.0; MAX_DIM];
            xs[..x.len()].copy_from_slice(x);
            op.eval(&Jet2 { x: xs, r, p, hess })
        })
    }
}
