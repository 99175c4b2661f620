//! Concentration measures of the measurement error and of the source, their
//! diagnostics, and the distributional Euler-Lagrange residual.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{partial, slots};
use crate::error::{Error, Result};
use crate::functional::{
    check_p, soft_norm_density, Linearisation, ProblemData, RegularisationParams,
};
use crate::grid::{Grid, ScalarField};
use crate::operators::{axis_of, pair_of};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Carrier {
    Measurement,
    Domain,
}

/// Signed measure `density * (weights / total_mass)` on a set of grid nodes.
///
/// `density` is taken against the normalised carrier measure, so the total
/// variation is the weighted average of `|density|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub carrier: Carrier,
    pub p: f64,
    pub nodes: Vec<usize>,
    pub density: Vec<f64>,
    pub weights: Vec<f64>,
    /// `H^kappa(K)` or `L^n(Omega)`.
    pub total_mass: f64,
    /// Softened `L^p` norm that normalises the density.
    pub soft_norm: f64,
}

impl DiscreteMeasure {
    /// Mass `w_j / total_mass * density_j` of each atom.
    pub fn masses(&self) -> Vec<f64> {
        self.density
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| d * w / self.total_mass)
            .collect()
    }
}

/// Error measure on the measurement set: density `|K[u]-k|_(p)^{p-2} (K[u]-k) / N^{p-1}`.
pub fn density_nu_p(u: &ScalarField, data: &ProblemData, p: f64) -> Result<DiscreteMeasure> {
    check_p(p, data.grid().dim())?;
    let lin = Linearisation::at(u, data);
    let ks = data.measurement();
    let (soft_norm, density) = soft_norm_density(&lin.k_residual, ks.weights(), p);
    Ok(DiscreteMeasure {
        carrier: Carrier::Measurement,
        p,
        nodes: ks.nodes().to_vec(),
        density,
        weights: ks.weights().to_vec(),
        total_mass: ks.total_mass(),
        soft_norm,
    })
}

/// Source measure on the domain: density `|F[u]|_(p)^{p-2} F[u] / N^{p-1}`.
pub fn density_mu_p(u: &ScalarField, data: &ProblemData, p: f64) -> Result<DiscreteMeasure> {
    check_p(p, data.grid().dim())?;
    let lin = Linearisation::at(u, data);
    let grid = data.grid();
    let (soft_norm, density) = soft_norm_density(&lin.f, grid.weights(), p);
    Ok(DiscreteMeasure {
        carrier: Carrier::Domain,
        p,
        nodes: (0..grid.len()).collect(),
        density,
        weights: grid.weights().to_vec(),
        total_mass: grid.volume(),
        soft_norm,
    })
}

pub fn total_variation(m: &DiscreteMeasure) -> f64 {
    m.masses().iter().map(|v| v.abs()).sum()
}

/// `|m|`-mass fraction on atoms where `err >= (1 - delta) max(err)`.
///
/// `err` is indexed like the atoms of `m`. The zero measure yields 1.
pub fn concentration_fraction(m: &DiscreteMeasure, err: &[f64], delta: f64) -> Result<f64> {
    if err.len() != m.nodes.len() {
        return Err(Error::Mismatch(format!(
            "{} error values for {} atoms",
            err.len(),
            m.nodes.len()
        )));
    }
    let top = err.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = (1.0 - delta) * top;
    let masses = m.masses();
    let total: f64 = masses.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let near: f64 = masses
        .iter()
        .zip(err)
        .filter(|(_, &e)| e >= cut)
        .map(|(v, _)| v.abs())
        .sum();
    Ok(near / total)
}

/// Largest distance from an atom with `|density| >= threshold * max|density|`
/// to the nearest atom where `err >= (1 - delta) max(err)`.
///
/// Returns 0 for the zero measure.
pub fn support_distance(
    grid: &Grid,
    m: &DiscreteMeasure,
    err: &[f64],
    delta: f64,
    threshold: f64,
) -> Result<f64> {
    if err.len() != m.nodes.len() {
        return Err(Error::Mismatch(
            "error values do not match the atoms".into(),
        ));
    }
    let top_d = m.density.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    if top_d == 0.0 {
        return Ok(0.0);
    }
    let top_e = err.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax: Vec<usize> = m
        .nodes
        .iter()
        .zip(err)
        .filter(|(_, &e)| e >= (1.0 - delta) * top_e)
        .map(|(&i, _)| i)
        .collect();
    Ok(m.nodes
        .iter()
        .zip(&m.density)
        .filter(|(_, d)| d.abs() >= threshold * top_d)
        .map(|(&i, _)| {
            argmax
                .iter()
                .map(|&j| grid.distance(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

/// Essential limsup of `values` (indexed like `nodes`) at node `x`: the max over
/// positive-weight carrier nodes inside the smallest ball of the radius ladder
/// that contains any of them.
pub fn essential_limsup(
    grid: &Grid,
    nodes: &[usize],
    weights: &[f64],
    values: &[f64],
    x: usize,
    radii: &[f64],
) -> Result<f64> {
    if nodes.len() != weights.len() || nodes.len() != values.len() {
        return Err(Error::Mismatch("carrier arrays differ in length".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    for r in radii {
        let best = nodes
            .iter()
            .zip(weights)
            .zip(values)
            .filter(|((&j, &w), _)| w > 0.0 && grid.distance(x, j) <= r)
            .map(|(_, &v)| v)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        if let Some(b) = best {
            return Ok(b);
        }
    }
    Err(Error::EmptyBall)
}

/// Nodes within two grid lines of the boundary.
pub fn collar(grid: &Grid) -> Vec<bool> {
    (0..grid.len())
        .map(|i| {
            let ij = grid.unravel(i);
            (0..grid.dim()).any(|a| ij[a] < 2 || ij[a] + 2 >= grid.resolution()[a])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// `prod_a ((x_a - l_a)(r_a - x_a))^q` on a random sub-box.
    PolynomialBump,
    /// Polynomial bump times a random sine wave.
    SineBump,
}

/// A seeded test function vanishing on the two-node boundary collar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunction {
    pub seed: u64,
    pub kind: TestKind,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// `count` test functions, alternating polynomial and sine bumps; function `k`
/// is drawn from seed `seed + k`.
pub fn test_functions(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<TestFunction> {
    let n = grid.dim();
    let q = (grid.top_order() + 1) as i32;
    let col = collar(grid);
    (0..count)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let kind = if k % 2 == 0 {
                TestKind::PolynomialBump
            } else {
                TestKind::SineBump
            };
            let mut lo = [0.0; 2];
            let mut hi = [0.0; 2];
            let mut freq = [0.0; 2];
            let mut phase = [0.0; 2];
            for a in 0..n {
                let iv = grid.extents()[a];
                let inner_lo = iv.lo + 2.0 * grid.spacing()[a];
                let inner_hi = iv.hi - 2.0 * grid.spacing()[a];
                let span = inner_hi - inner_lo;
                let l = inner_lo + rng.gen_range(0.0..0.4) * span;
                let r = inner_hi - rng.gen_range(0.0..0.4) * span;
                lo[a] = l;
                hi[a] = r;
                freq[a] = rng.gen_range(1.0..4.0) * PI / (r - l);
                phase[a] = rng.gen_range(0.0..2.0 * PI);
            }
            let values = (0..grid.len())
                .map(|i| {
                    if col[i] {
                        return 0.0;
                    }
                    let x = grid.coords(i);
                    let mut v = 1.0;
                    for a in 0..n {
                        if x[a] <= lo[a] || x[a] >= hi[a] {
                            return 0.0;
                        }
                        let t = (x[a] - lo[a]) * (hi[a] - x[a]) / ((hi[a] - lo[a]) * 0.5).powi(2);
                        v *= t.powi(q);
                        if kind == TestKind::SineBump {
                            v *= (freq[a] * (x[a] - lo[a]) + phase[a]).sin();
                        }
                    }
                    v
                })
                .collect();
            TestFunction {
                seed: s,
                kind,
                values,
            }
        })
        .collect()
}

/// Euler-Lagrange pairing of `phi` with the triple `(u, mu, nu)`:
/// `int (K_r phi + K_p.Dphi) dnu + alpha int (F_r phi + F_p.Dphi + F_X:D^2phi) dmu
///  + beta avg(D^{n̄}u : D^{n̄}phi)`.
///
/// `phi` must vanish on boundary nodes.
pub fn el_pairing(
    u: &ScalarField,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    params: &RegularisationParams,
    data: &ProblemData,
    phi: &[f64],
) -> Result<f64> {
    let grid = data.grid();
    if phi.len() != grid.len() {
        return Err(Error::Mismatch("test function length".into()));
    }
    if let Some(i) = grid.boundary_nodes().find(|&i| phi[i] != 0.0) {
        return Err(Error::TestFunctionSupport { node: i });
    }
    if nu.nodes != data.measurement().nodes() || mu.nodes.len() != grid.len() {
        return Err(Error::Mismatch(
            "measures do not match the problem carriers".into(),
        ));
    }
    let n = grid.dim();
    let lin = Linearisation::at(u, data);
    let d1: Vec<Vec<f64>> = slots(n, 1)
        .into_iter()
        .map(|(c, _)| partial(grid, phi, c))
        .collect();
    let d2: Vec<(usize, usize, f64, Vec<f64>)> = slots(n, 2)
        .into_iter()
        .map(|(c, m)| {
            let (a, b) = pair_of(c, n);
            (a, b, m, partial(grid, phi, c))
        })
        .collect();

    let mut data_term = 0.0;
    for (j, (&node, mass)) in nu.nodes.iter().zip(nu.masses()).enumerate() {
        let mut v = lin.k_r[j] * phi[node];
        for (c, _) in slots(n, 1) {
            let a = axis_of(c);
            v += lin.k_p[j][a] * d1[a][node];
        }
        data_term += mass * v;
    }

    let mut source_term = 0.0;
    for (i, mass) in mu.masses().into_iter().enumerate() {
        let q = &lin.f_parts[i];
        let mut v = q.r * phi[i];
        for (a, da) in d1.iter().enumerate() {
            v += q.p[a] * da[i];
        }
        for (a, b, m, dab) in &d2 {
            v += m * q.hess[*a][*b] * dab[i];
        }
        source_term += mass * v;
    }

    let vol = grid.volume();
    let mut visc = 0.0;
    for (counts, mult, du) in &lin.top {
        let dphi = partial(grid, phi, *counts);
        for i in 0..grid.len() {
            visc += mult * du[i] * dphi[i] * grid.weights()[i] / vol;
        }
    }

    Ok(data_term + params.alpha * source_term + params.beta * visc)
}

/// Max over the test set of `|pairing(phi)| / sum_i |phi_i|`.
///
/// With this normalisation the residual never exceeds the gradient sup-norm.
pub fn el_residual(
    u: &ScalarField,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    params: &RegularisationParams,
    data: &ProblemData,
    tests: &[TestFunction],
) -> Result<f64> {
    let col = collar(data.grid());
    let mut worst: f64 = 0.0;
    for t in tests {
        if let Some(i) = (0..col.len()).find(|&i| col[i] && t.values[i] != 0.0) {
            return Err(Error::TestFunctionSupport { node: i });
        }
        let l1: f64 = t.values.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            continue;
        }
        let pair = el_pairing(u, mu, nu, params, data, &t.values)?;
        worst = worst.max(pair.abs() / l1);
    }
    Ok(worst)
}
