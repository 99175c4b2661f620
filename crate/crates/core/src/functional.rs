//! The regularised energies `E_p` and `E_inf` and the discrete Gateaux gradient of `E_p`.
//!
//! The gradient is assembled by transposing the derivative stencils onto the
//! density fields, so it is the exact derivative of the discrete energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{average, lp_unchecked, partial, partial_adjoint, slots, softabs, Counts};
use crate::error::{Error, Result};
use crate::grid::{Grid, MeasurementSet, ScalarField};
use crate::operators::{
    axis_of, check_dims, jets2, pair_of, Jet1, OperatorF, OperatorK, SourcePartials, Vector,
};

/// Weights of the three energy terms and the exponent ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularisationParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub ladder: Vec<f64>,
}

impl RegularisationParams {
    /// Validates against the spatial dimension `n`: ladder entries must exceed `n`.
    pub fn new(alpha: f64, beta: f64, gamma: f64, ladder: Vec<f64>, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Param {
                name: "alpha",
                reason: format!("{alpha} must be positive"),
            });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Param {
                name: "beta",
                reason: format!("{beta} must be positive"),
            });
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Param {
                name: "gamma",
                reason: format!("{gamma} must be non-negative"),
            });
        }
        if ladder.is_empty() {
            return Err(Error::Param {
                name: "p_ladder",
                reason: "ladder is empty".into(),
            });
        }
        if ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Param {
                name: "p_ladder",
                reason: "ladder not increasing".into(),
            });
        }
        if let Some(p) = ladder.iter().find(|&&p| !(p > n as f64 && p.is_finite())) {
            return Err(Error::Param {
                name: "p_ladder",
                reason: format!("exponent {p} must exceed the dimension {n}"),
            });
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            ladder,
        })
    }
}

/// Grid, operators, measurement set, boundary data and observations of one inverse problem.
#[derive(Debug, Clone)]
pub struct ProblemData {
    grid: Arc<Grid>,
    op_f: Arc<dyn OperatorF>,
    op_k: Arc<dyn OperatorK>,
    measurement: MeasurementSet,
    boundary: ScalarField,
    observations: Vec<f64>,
}

impl ProblemData {
    pub fn new(
        op_f: Arc<dyn OperatorF>,
        op_k: Arc<dyn OperatorK>,
        measurement: MeasurementSet,
        boundary: ScalarField,
        observations: Vec<f64>,
    ) -> Result<Self> {
        let grid = Arc::clone(boundary.grid());
        check_dims(&grid, Some(op_f.as_ref()), Some(op_k.as_ref()))?;
        if measurement.nodes().iter().any(|&i| i >= grid.len()) {
            return Err(Error::Measurement("measurement node outside grid".into()));
        }
        if observations.len() != measurement.len() {
            return Err(Error::Mismatch(format!(
                "{} observations for {} measurement nodes",
                observations.len(),
                measurement.len()
            )));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::Mismatch("non-finite observation".into()));
        }
        if grid
            .boundary_nodes()
            .any(|i| !boundary.values()[i].is_finite())
        {
            return Err(Error::Mismatch("non-finite boundary data".into()));
        }
        Ok(Self {
            grid,
            op_f,
            op_k,
            measurement,
            boundary,
            observations,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn op_f(&self) -> &dyn OperatorF {
        self.op_f.as_ref()
    }

    pub fn op_k(&self) -> &dyn OperatorK {
        self.op_k.as_ref()
    }

    pub fn op_f_arc(&self) -> &Arc<dyn OperatorF> {
        &self.op_f
    }

    pub fn op_k_arc(&self) -> &Arc<dyn OperatorK> {
        &self.op_k
    }

    pub fn measurement(&self) -> &MeasurementSet {
        &self.measurement
    }

    pub fn boundary(&self) -> &ScalarField {
        &self.boundary
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    /// Same problem with different observations.
    pub fn with_observations(&self, observations: Vec<f64>) -> Result<Self> {
        Self::new(
            Arc::clone(&self.op_f),
            Arc::clone(&self.op_k),
            self.measurement.clone(),
            self.boundary.clone(),
            observations,
        )
    }
}

/// Softened `L^p` norm `N = || |r|_(p) ||_p` together with the normalised density
/// `|r|_(p)^{p-2} r / N^{p-1}`.
pub(crate) fn soft_norm_density(r: &[f64], weights: &[f64], p: f64) -> (f64, Vec<f64>) {
    let s: Vec<f64> = r.iter().map(|&v| softabs(v, p)).collect();
    let norm = lp_unchecked(&s, weights, p);
    let density = r
        .iter()
        .zip(&s)
        .map(|(&v, &si)| (si / norm).powf(p - 2.0) * v / norm)
        .collect();
    (norm, density)
}

/// All pointwise quantities of `u` needed by the energies, the gradient, and the measures.
#[derive(Debug, Clone)]
pub(crate) struct Linearisation {
    /// `K[u] - k` on the measurement nodes.
    pub k_residual: Vec<f64>,
    pub k_r: Vec<f64>,
    pub k_p: Vec<Vector>,
    /// `F[u]` on every node.
    pub f: Vec<f64>,
    pub f_parts: Vec<SourcePartials>,
    /// `(counts, multiplicity, D^counts u)` for the top-order slots.
    pub top: Vec<(Counts, f64, Vec<f64>)>,
}

impl Linearisation {
    pub fn at(u: &ScalarField, data: &ProblemData) -> Self {
        let grid = u.grid();
        let jets = jets2(u);
        let f = jets.iter().map(|s| data.op_f.eval(s)).collect();
        let f_parts = jets.iter().map(|s| data.op_f.partials(s)).collect();
        let mut k_residual = Vec::with_capacity(data.measurement.len());
        let mut k_r = Vec::with_capacity(data.measurement.len());
        let mut k_p = Vec::with_capacity(data.measurement.len());
        for (&node, &obs) in data.measurement.nodes().iter().zip(&data.observations) {
            let s = &jets[node];
            let j1 = Jet1 {
                x: s.x,
                r: s.r,
                p: s.p,
            };
            k_residual.push(data.op_k.eval(&j1) - obs);
            let q = data.op_k.partials(&j1);
            k_r.push(q.r);
            k_p.push(q.p);
        }
        let top = slots(grid.dim(), grid.top_order())
            .into_iter()
            .map(|(c, m)| (c, m, partial(grid, u.values(), c)))
            .collect();
        Self {
            k_residual,
            k_r,
            k_p,
            f,
            f_parts,
            top,
        }
    }

    /// Normalised `||D^{n̄} u||^2_{L^2}`.
    pub fn viscosity(&self, grid: &Grid) -> f64 {
        let mut sq = vec![0.0; grid.len()];
        for (_, m, d) in &self.top {
            for (o, v) in sq.iter_mut().zip(d) {
                *o += m * v * v;
            }
        }
        average(&sq, grid.weights())
    }
}

/// The three terms of `E_p` before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `|| |K[u] - k|_(p) ||_{L^p(K)}`
    pub data: f64,
    /// `|| |F[u]|_(p) ||_{L^p(Omega)}`
    pub source: f64,
    /// `||D^{n̄} u||^2_{L^2(Omega)}`
    pub viscosity: f64,
}

impl EnergyTerms {
    pub fn total(&self, params: &RegularisationParams) -> f64 {
        self.data + params.alpha * self.source + 0.5 * params.beta * self.viscosity
    }
}

pub(crate) fn check_p(p: f64, n: usize) -> Result<()> {
    if !(p > n as f64 && p.is_finite()) {
        return Err(Error::Param {
            name: "p",
            reason: format!("{p} must exceed the dimension {n}"),
        });
    }
    Ok(())
}

fn check_field(u: &ScalarField, data: &ProblemData) -> Result<()> {
    if !(Arc::ptr_eq(u.grid(), &data.grid) || **u.grid() == *data.grid) {
        return Err(Error::Mismatch(
            "field and problem live on different grids".into(),
        ));
    }
    Ok(())
}

pub fn energy_terms_p(u: &ScalarField, data: &ProblemData, p: f64) -> Result<EnergyTerms> {
    check_field(u, data)?;
    check_p(p, data.grid.dim())?;
    let lin = Linearisation::at(u, data);
    Ok(terms_from(&lin, data, p))
}

fn terms_from(lin: &Linearisation, data: &ProblemData, p: f64) -> EnergyTerms {
    let soft = |v: &[f64], w: &[f64]| {
        let s: Vec<f64> = v.iter().map(|&x| softabs(x, p)).collect();
        lp_unchecked(&s, w, p)
    };
    EnergyTerms {
        data: soft(&lin.k_residual, data.measurement.weights()),
        source: soft(&lin.f, data.grid.weights()),
        viscosity: lin.viscosity(&data.grid),
    }
}

/// `E_p(u)`.
pub fn energy_p(
    u: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
    p: f64,
) -> Result<f64> {
    Ok(energy_terms_p(u, data, p)?.total(params))
}

/// `E_inf(u)`: sup-norm data and source terms plus the viscosity term.
pub fn energy_inf(
    u: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
) -> Result<f64> {
    check_field(u, data)?;
    let lin = Linearisation::at(u, data);
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(sup(&lin.k_residual)
        + params.alpha * sup(&lin.f)
        + 0.5 * params.beta * lin.viscosity(&data.grid))
}

/// Nodal gradient of `E_p`; boundary entries are zero.
pub fn gradient_p(
    u: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
    p: f64,
) -> Result<Vec<f64>> {
    Ok(energy_and_gradient_p(u, params, data, p)?.1)
}

/// `E_p(u)` and its gradient from one linearisation.
pub fn energy_and_gradient_p(
    u: &ScalarField,
    params: &RegularisationParams,
    data: &ProblemData,
    p: f64,
) -> Result<(f64, Vec<f64>)> {
    check_field(u, data)?;
    check_p(p, data.grid.dim())?;
    let lin = Linearisation::at(u, data);
    let energy = terms_from(&lin, data, p).total(params);
    let grad = assemble_gradient(&lin, params, data, p);
    Ok((energy, grad))
}

pub(crate) fn assemble_gradient(
    lin: &Linearisation,
    params: &RegularisationParams,
    data: &ProblemData,
    p: f64,
) -> Vec<f64> {
    let grid = &data.grid;
    let n = grid.dim();
    let len = grid.len();
    let mut grad = vec![0.0; len];

    // measurement term
    let ks = &data.measurement;
    let total_k = ks.total_mass();
    let (_, nu) = soft_norm_density(&lin.k_residual, ks.weights(), p);
    let mut flux = vec![vec![0.0; len]; n];
    for (j, &node) in ks.nodes().iter().enumerate() {
        let c = nu[j] * ks.weights()[j] / total_k;
        grad[node] += c * lin.k_r[j];
        for (a, fa) in flux.iter_mut().enumerate() {
            fa[node] += c * lin.k_p[j][a];
        }
    }
    for (a, fa) in flux.iter().enumerate() {
        if fa.iter().any(|&v| v != 0.0) {
            let mut counts = [0; 2];
            counts[a] = 1;
            add_into(&mut grad, &partial_adjoint(grid, fa, counts), 1.0);
        }
    }

    // source term
    let vol = grid.volume();
    let (_, mu) = soft_norm_density(&lin.f, grid.weights(), p);
    let coef: Vec<f64> = mu
        .iter()
        .zip(grid.weights())
        .map(|(m, w)| params.alpha * m * w / vol)
        .collect();
    for i in 0..len {
        grad[i] += coef[i] * lin.f_parts[i].r;
    }
    for (counts, _) in slots(n, 1) {
        let a = axis_of(counts);
        let v: Vec<f64> = (0..len).map(|i| coef[i] * lin.f_parts[i].p[a]).collect();
        if v.iter().any(|&x| x != 0.0) {
            add_into(&mut grad, &partial_adjoint(grid, &v, counts), 1.0);
        }
    }
    for (counts, mult) in slots(n, 2) {
        let (a, b) = pair_of(counts, n);
        let v: Vec<f64> = (0..len)
            .map(|i| coef[i] * lin.f_parts[i].hess[a][b])
            .collect();
        if v.iter().any(|&x| x != 0.0) {
            add_into(&mut grad, &partial_adjoint(grid, &v, counts), mult);
        }
    }

    // viscosity term
    for (counts, mult, d) in &lin.top {
        let v: Vec<f64> = d
            .iter()
            .zip(grid.weights())
            .map(|(x, w)| x * w / vol)
            .collect();
        add_into(
            &mut grad,
            &partial_adjoint(grid, &v, *counts),
            params.beta * mult,
        );
    }

    for i in grid.boundary_nodes() {
        grad[i] = 0.0;
    }
    grad
}

fn add_into(acc: &mut [f64], v: &[f64], scale: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += scale * b;
    }
}
