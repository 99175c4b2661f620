//! Limited-memory BFGS minimisation of `E_p` and continuation along the exponent ladder.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::banded::BandCholesky;
use crate::calculus::{partial, slots};
use crate::error::{Error, Result};
use crate::forward::solve_dirichlet;
use crate::functional::{check_p, energy_and_gradient_p, ProblemData, RegularisationParams};
use crate::grid::ScalarField;
use crate::hessian::gauss_newton;
use crate::operators::laplacian;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    /// Armijo sufficient-decrease slope.
    pub armijo: f64,
    /// Backtracking contraction factor.
    pub backtrack: f64,
    /// Line searches giving up below this step length (sup-norm of the update) stall.
    pub min_step: f64,
    /// Relative energy noise floor below which the approximate Wolfe test replaces Armijo.
    pub noise: f64,
    /// Accepted steps between rebuilds of the Gauss-Newton preconditioner; 0 disables it.
    pub refresh: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 12,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-14,
            noise: 1e-13,
            refresh: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RungStatus {
    Converged,
    MaxIterations,
    LineSearchStall,
}

/// Outcome of one minimisation at fixed `p`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungRecord {
    pub p: f64,
    pub tol: f64,
    pub iterations: usize,
    pub energy: f64,
    /// Sup-norm of the gradient at the returned iterate.
    pub grad_norm: f64,
    pub line_search_failures: usize,
    pub status: RungStatus,
    /// C^2 distance to the previous rung's minimiser.
    pub c2_dist_prev: Option<f64>,
    /// Energy at the start of the rung.
    pub start_energy: f64,
    pub wall_time_s: f64,
    /// Energy after every accepted step, starting value first.
    #[serde(skip)]
    pub energies: Vec<f64>,
}

impl RungRecord {
    pub fn converged(&self) -> bool {
        self.status == RungStatus::Converged
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// L-BFGS direction with initial inverse Hessian `M^{-1}` when a factor is
/// given, otherwise the scaled identity.
fn two_loop(history: &VecDeque<Pair>, g: &[f64], precond: Option<&BandCholesky>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(m) = precond {
        m.solve(&mut q);
    } else if let Some(last) = history.back() {
        let scale = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for (pair, a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimises `E_p` from `u0` (which must carry the boundary data) until the
/// gradient sup-norm is at most `tol`.
pub fn minimise_fixed_p(
    u0: &ScalarField,
    p: f64,
    params: &RegularisationParams,
    data: &ProblemData,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, RungRecord)> {
    minimise_with(u0, p, params, data, tol, max_iter, &LbfgsOptions::default())
}

pub fn minimise_with(
    u0: &ScalarField,
    p: f64,
    params: &RegularisationParams,
    data: &ProblemData,
    tol: f64,
    max_iter: usize,
    opts: &LbfgsOptions,
) -> Result<(ScalarField, RungRecord)> {
    check_p(p, data.grid().dim())?;
    let started = Instant::now();
    let grid = Arc::clone(data.grid());
    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let u = ScalarField::from_raw(Arc::clone(&grid), x.to_vec());
        let (e, g) = energy_and_gradient_p(&u, params, data, p)?;
        if !e.is_finite() {
            return Err(Error::Mismatch(format!("non-finite energy at p = {p}")));
        }
        Ok((e, g))
    };

    let mut x = u0.with_boundary_of(data.boundary()).into_values();
    let (mut f, mut g) = eval(&x)?;
    let mut energies = vec![f];
    let start_energy = f;
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut failures = 0;
    let mut iterations = 0;
    let scale = sup(&x).max(1.0);
    let build = |x: &[f64]| -> Option<BandCholesky> {
        if opts.refresh == 0 {
            return None;
        }
        let u = ScalarField::from_raw(Arc::clone(&grid), x.to_vec());
        gauss_newton(&u, params, data, p).ok()
    };
    let mut precond = build(&x);
    let mut since_build = 0;

    let status = loop {
        if sup(&g) <= tol {
            break RungStatus::Converged;
        }
        if iterations >= max_iter {
            break RungStatus::MaxIterations;
        }
        if opts.refresh > 0 && since_build >= opts.refresh {
            precond = build(&x);
            since_build = 0;
        }
        let mut d = two_loop(&history, &g, precond.as_ref());
        let mut slope = dot(&g, &d);
        if (history.is_empty() && precond.is_none()) || !(slope < 0.0) {
            history.clear();
            d = two_loop(&history, &g, precond.as_ref());
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                let gn = dot(&g, &g).sqrt();
                d = g.iter().map(|v| -v / gn).collect();
                slope = dot(&g, &d);
            }
        }

        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let (ft, gt) = eval(&trial)?;
            if ft <= f + opts.armijo * t * slope {
                break Some((trial, ft, gt));
            }
            // Near convergence the decrease drops below rounding in `f`; the
            // approximate Wolfe test (Hager-Zhang) judges it from slopes instead.
            if ft <= f + opts.noise * f.abs() && dot(&gt, &d) <= (2.0 * 0.1 - 1.0) * slope {
                break Some((trial, ft, gt));
            }
            t *= opts.backtrack;
            if t * sup(&d) < opts.min_step * scale {
                break None;
            }
        };

        match accepted {
            Some((xn, fn_, gn)) => {
                let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                    if history.len() == opts.memory {
                        history.pop_front();
                    }
                    history.push_back(Pair {
                        rho: 1.0 / sy,
                        s,
                        y,
                    });
                } else {
                    history.clear();
                }
                x = xn;
                f = fn_;
                g = gn;
                energies.push(f);
                iterations += 1;
                since_build += 1;
            }
            None => {
                failures += 1;
                if history.is_empty() && (precond.is_none() || since_build == 0) {
                    break RungStatus::LineSearchStall;
                }
                history.clear();
                if since_build > 0 {
                    precond = build(&x);
                    since_build = 0;
                }
            }
        }
    };

    let record = RungRecord {
        p,
        tol,
        iterations,
        energy: f,
        grad_norm: sup(&g),
        line_search_failures: failures,
        status,
        c2_dist_prev: None,
        start_energy,
        wall_time_s: started.elapsed().as_secs_f64(),
        energies,
    };
    Ok((ScalarField::from_raw(grid, x), record))
}

/// `max` over nodes of `|w|`, `|Dw|` and `|D^2 w|` for `w = a - b`.
pub fn c2_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    let grid = a.grid();
    let w: Vec<f64> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .collect();
    let mut m = sup(&w);
    for k in 1..=2 {
        for (counts, _) in slots(grid.dim(), k) {
            m = m.max(sup(&partial(grid, &w, counts)));
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Discrete harmonic extension of the boundary data.
    Harmonic,
    /// The boundary data field itself.
    BoundaryField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub rungs: Vec<RungRecord>,
    pub initial_guess: InitialGuess,
    /// Set when a rung failed to converge and the ladder stopped there.
    pub aborted_at: Option<f64>,
    /// Rungs whose C^2 distance to the previous minimiser grew.
    pub non_monotone_c2: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct Continuation {
    /// Minimisers in ladder order; shorter than the ladder if aborted.
    pub trajectory: Vec<ScalarField>,
    pub report: SolveReport,
    /// Starting iterate of the first rung.
    pub initial: ScalarField,
}

/// Tolerances interpolated geometrically from `first` to `last` along a ladder of `len` rungs.
pub fn geometric_schedule(first: f64, last: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![last];
    }
    (0..len)
        .map(|k| first * (last / first).powf(k as f64 / (len - 1) as f64))
        .collect()
}

/// Starting iterate: harmonic extension of `g`, or `g` itself if that solve fails.
pub fn initial_guess(data: &ProblemData) -> (ScalarField, InitialGuess) {
    let g = data.boundary();
    let grid = data.grid();
    let harmonic = laplacian(grid.dim()).ok().and_then(|op| {
        let zero = ScalarField::zeros(Arc::clone(grid));
        solve_dirichlet(&op, &zero, g, 1e-10, 5)
            .ok()
            .filter(|s| s.converged())
    });
    match harmonic {
        Some(s) => (s.u, InitialGuess::Harmonic),
        None => (g.clone(), InitialGuess::BoundaryField),
    }
}

/// Runs [`minimise_fixed_p`] along the ladder, warm-starting every rung from the
/// previous minimiser.
pub fn p_continuation(
    data: &ProblemData,
    params: &RegularisationParams,
    tol_schedule: &[f64],
    max_iter: usize,
) -> Result<Continuation> {
    if tol_schedule.len() != params.ladder.len() {
        return Err(Error::Param {
            name: "tol_schedule",
            reason: format!(
                "{} tolerances for {} rungs",
                tol_schedule.len(),
                params.ladder.len()
            ),
        });
    }
    if let Some(t) = tol_schedule.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::Param {
            name: "tol_schedule",
            reason: format!("tolerance {t} must be positive"),
        });
    }
    let started = Instant::now();
    let (initial, kind) = initial_guess(data);
    let mut trajectory: Vec<ScalarField> = Vec::new();
    let mut rungs: Vec<RungRecord> = Vec::new();
    let mut aborted_at = None;
    let mut non_monotone = Vec::new();
    for (&p, &tol) in params.ladder.iter().zip(tol_schedule) {
        let start = trajectory.last().unwrap_or(&initial);
        let (u, mut rec) = minimise_fixed_p(start, p, params, data, tol, max_iter)?;
        if let Some(prev) = trajectory.last() {
            let d = c2_distance(&u, prev);
            if let Some(last) = rungs.last().and_then(|r| r.c2_dist_prev) {
                if d > last {
                    non_monotone.push(p);
                }
            }
            rec.c2_dist_prev = Some(d);
        }
        let ok = rec.converged();
        rungs.push(rec);
        trajectory.push(u);
        if !ok {
            aborted_at = Some(p);
            break;
        }
    }
    Ok(Continuation {
        trajectory,
        report: SolveReport {
            rungs,
            initial_guess: kind,
            aborted_at,
            non_monotone_c2: non_monotone,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        initial,
    })
}
