//! Banded Gauss-Newton model of the Hessian of `E_p`, used to precondition the
//! quasi-Newton iteration.

use crate::banded::BandCholesky;
use crate::calculus::{slots, softabs};
use crate::error::Result;
use crate::forward::derivative_row;
use crate::functional::{soft_norm_density, Linearisation, ProblemData, RegularisationParams};
use crate::grid::{Grid, ScalarField};
use crate::operators::{axis_of, pair_of};

/// Sub-diagonal count covering every product of two stencil rows.
fn half_bandwidth(grid: &Grid) -> usize {
    let m0 = grid.resolution()[0];
    if grid.dim() == 1 {
        4
    } else {
        4 * m0 + 4
    }
}

/// Curvature of `N = ||softabs(r)||_p` in each residual entry, with the
/// negative rank-one part dropped.
fn norm_curvature(r: &[f64], weights: &[f64], total: f64, p: f64) -> Vec<f64> {
    let (norm, _) = soft_norm_density(r, weights, p);
    r.iter()
        .zip(weights)
        .map(|(&v, &w)| {
            let s = softabs(v, p);
            w / total * (s / norm).powf(p - 2.0) / norm * (1.0 + (p - 2.0) * v * v / (s * s))
        })
        .collect()
}

struct Accumulator<'a> {
    grid: &'a Grid,
    m: BandCholesky,
}

impl Accumulator<'_> {
    /// Adds `c * row row^T` restricted to interior nodes.
    fn outer(&mut self, row: &[(usize, f64)], c: f64) {
        if c == 0.0 {
            return;
        }
        for &(i, a) in row {
            if self.grid.is_boundary(i) {
                continue;
            }
            for &(j, b) in row {
                if j <= i && !self.grid.is_boundary(j) {
                    self.m.add(i, j, c * a * b);
                }
            }
        }
    }
}

fn merge(row: &mut Vec<(usize, f64)>, other: Vec<(usize, f64)>, scale: f64) {
    for (j, v) in other {
        match row.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += scale * v,
            None => row.push((j, scale * v)),
        }
    }
}

/// Factored Gauss-Newton matrix at `u`; boundary unknowns get unit rows.
pub(crate) fn gauss_newton(
    u: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
    p: f64,
) -> Result<BandCholesky> {
    let grid = data.grid();
    let n = grid.dim();
    let lin = Linearisation::at(u, data);
    let mut acc = Accumulator {
        grid,
        m: BandCholesky::zeros(grid.len(), half_bandwidth(grid)),
    };

    let ks = data.measurement();
    let ck = norm_curvature(&lin.k_residual, ks.weights(), ks.total_mass(), p);
    for (j, &node) in ks.nodes().iter().enumerate() {
        let mut row = vec![(node, lin.k_r[j])];
        for (counts, _) in slots(n, 1) {
            merge(
                &mut row,
                derivative_row(grid, node, counts),
                lin.k_p[j][axis_of(counts)],
            );
        }
        acc.outer(&row, ck[j]);
    }

    let cf = norm_curvature(&lin.f, grid.weights(), grid.volume(), p);
    for i in 0..grid.len() {
        let q = &lin.f_parts[i];
        let mut row = vec![(i, q.r)];
        for (counts, _) in slots(n, 1) {
            merge(
                &mut row,
                derivative_row(grid, i, counts),
                q.p[axis_of(counts)],
            );
        }
        for (counts, mult) in slots(n, 2) {
            let (a, b) = pair_of(counts, n);
            merge(
                &mut row,
                derivative_row(grid, i, counts),
                mult * q.hess[a][b],
            );
        }
        acc.outer(&row, params.alpha * cf[i]);
    }

    let vol = grid.volume();
    for i in 0..grid.len() {
        let c = params.beta * grid.weights()[i] / vol;
        for (counts, mult, _) in &lin.top {
            acc.outer(&derivative_row(grid, i, *counts), c * mult);
        }
    }

    let mut m = acc.m;
    let top = (0..grid.len())
        .map(|i| m.diagonal(i))
        .fold(0.0f64, f64::max);
    for i in 0..grid.len() {
        if grid.is_boundary(i) {
            m.add(i, i, 1.0);
        } else {
            m.add(i, i, 1e-12 * top);
        }
    }
    m.factor()
}
