//! Second-order source operators `F(x, r, p, X)` and first-order observation
//! operators `K(x, r, p)`, with analytic partial derivatives.

use std::fmt::Debug;
use std::sync::Arc;

use crate::calculus::{diff, slots, TensorField, TensorSlot};
use crate::error::{Error, Result};
use crate::grid::{Grid, MeasurementSet, ScalarField, MAX_DIM};

pub type Vector = [f64; MAX_DIM];
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

/// Pointwise arguments of a second-order operator. Components beyond the
/// spatial dimension are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet2 {
    pub x: Vector,
    pub r: f64,
    pub p: Vector,
    pub hess: Matrix,
}

/// Pointwise arguments of a first-order operator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet1 {
    pub x: Vector,
    pub r: f64,
    pub p: Vector,
}

/// `(F_r, F_p, F_X)` at one point; `F_X` is symmetric.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SourcePartials {
    pub r: f64,
    pub p: Vector,
    pub hess: Matrix,
}

/// `(K_r, K_p)` at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObservationPartials {
    pub r: f64,
    pub p: Vector,
}

/// A fully nonlinear second-order operator. `F_X` is the gradient with respect to
/// the full symmetric matrix, so `dF = F_X : dX` for symmetric `dX`.
pub trait OperatorF: Debug + Send + Sync {
    fn name(&self) -> &str;
    /// Spatial dimension the coefficients are tied to, if any.
    fn dim(&self) -> Option<usize> {
        None
    }
    fn eval(&self, s: &Jet2) -> f64;
    fn partials(&self, s: &Jet2) -> SourcePartials;
}

/// A first-order observation operator.
pub trait OperatorK: Debug + Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> Option<usize> {
        None
    }
    fn eval(&self, s: &Jet1) -> f64;
    fn partials(&self, s: &Jet1) -> ObservationPartials;
}

fn mat_dot(a: &Matrix, b: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

fn vec_dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Whether the leading `n x n` block is symmetric positive definite.
pub(crate) fn is_spd(a: &Matrix, n: usize) -> bool {
    match n {
        1 => a[0][0] > 0.0,
        2 => {
            let sym = (a[0][1] - a[1][0]).abs() <= 1e-12 * (a[0][1].abs() + a[1][0].abs() + 1.0);
            sym && a[0][0] > 0.0 && a[0][0] * a[1][1] - a[0][1] * a[1][0] > 0.0
        }
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearForm {
    /// `div(A Du) + b.Du + c u`
    Divergence,
    /// `A : D^2 u + b.Du + c u`
    NonDivergence,
}

/// Linear operator with constant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    form: LinearForm,
    n: usize,
    a: Matrix,
    b: Vector,
    c: f64,
}

impl LinearOperator {
    fn new(form: LinearForm, a: &[f64], b: &[f64], c: f64) -> Result<Self> {
        let n = b.len();
        if n == 0 || n > MAX_DIM || a.len() != n * n {
            return Err(Error::Operator(format!(
                "coefficient shapes: A has {} entries, b has {}",
                a.len(),
                n
            )));
        }
        let mut am = Matrix::default();
        let mut bv = Vector::default();
        for i in 0..n {
            bv[i] = b[i];
            for j in 0..n {
                am[i][j] = a[i * n + j];
            }
        }
        if !is_spd(&am, n) {
            return Err(Error::Operator(
                "A must be symmetric positive definite".into(),
            ));
        }
        if !c.is_finite() || bv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Operator("non-finite coefficient".into()));
        }
        Ok(Self {
            form,
            n,
            a: am,
            b: bv,
            c,
        })
    }

    pub fn form(&self) -> LinearForm {
        self.form
    }
}

impl OperatorF for LinearOperator {
    fn name(&self) -> &str {
        match self.form {
            LinearForm::Divergence => "linear_divergence",
            LinearForm::NonDivergence => "linear_nondivergence",
        }
    }

    fn dim(&self) -> Option<usize> {
        Some(self.n)
    }

    // With constant A, div(A Du) expands to A : D^2 u.
    fn eval(&self, s: &Jet2) -> f64 {
        mat_dot(&self.a, &s.hess) + vec_dot(&self.b, &s.p) + self.c * s.r
    }

    fn partials(&self, _s: &Jet2) -> SourcePartials {
        SourcePartials {
            r: self.c,
            p: self.b,
            hess: self.a,
        }
    }
}

/// `F(x, r, p, X) = tr X + eps sqrt(1 + |X|^2)`, uniformly elliptic for `eps < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullyNonlinearEps {
    eps: f64,
}

impl FullyNonlinearEps {
    pub fn eps(&self) -> f64 {
        self.eps
    }
}

impl OperatorF for FullyNonlinearEps {
    fn name(&self) -> &str {
        "fully_nonlinear_eps"
    }

    fn eval(&self, s: &Jet2) -> f64 {
        let tr = s.hess[0][0] + s.hess[1][1];
        tr + self.eps * (1.0 + mat_dot(&s.hess, &s.hess)).sqrt()
    }

    fn partials(&self, s: &Jet2) -> SourcePartials {
        let root = (1.0 + mat_dot(&s.hess, &s.hess)).sqrt();
        let mut hess = Matrix::default();
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                hess[i][j] = self.eps * s.hess[i][j] / root;
            }
            hess[i][i] += 1.0;
        }
        SourcePartials {
            r: 0.0,
            p: Vector::default(),
            hess,
        }
    }
}

/// `K(x, r, p) = r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsIdentity;

impl OperatorK for ObsIdentity {
    fn name(&self) -> &str {
        "obs_identity"
    }

    fn eval(&self, s: &Jet1) -> f64 {
        s.r
    }

    fn partials(&self, _s: &Jet1) -> ObservationPartials {
        ObservationPartials {
            r: 1.0,
            p: Vector::default(),
        }
    }
}

/// `K(x, r, p) = r + b.p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsFlux {
    n: usize,
    b: Vector,
}

impl OperatorK for ObsFlux {
    fn name(&self) -> &str {
        "obs_flux"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.n)
    }

    fn eval(&self, s: &Jet1) -> f64 {
        s.r + vec_dot(&self.b, &s.p)
    }

    fn partials(&self, _s: &Jet1) -> ObservationPartials {
        ObservationPartials { r: 1.0, p: self.b }
    }
}

pub fn linear_divergence(a: &[f64], b: &[f64], c: f64) -> Result<LinearOperator> {
    LinearOperator::new(LinearForm::Divergence, a, b, c)
}

pub fn linear_nondivergence(a: &[f64], b: &[f64], c: f64) -> Result<LinearOperator> {
    LinearOperator::new(LinearForm::NonDivergence, a, b, c)
}

/// The Laplacian on `R^n` as a non-divergence linear operator.
pub fn laplacian(n: usize) -> Result<LinearOperator> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    linear_nondivergence(&a, &vec![0.0; n], 0.0)
}

pub fn fully_nonlinear_eps(eps: f64) -> Result<FullyNonlinearEps> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Operator(format!("eps = {eps} must lie in [0, 1)")));
    }
    Ok(FullyNonlinearEps { eps })
}

pub fn obs_identity() -> ObsIdentity {
    ObsIdentity
}

pub fn obs_flux(b: &[f64]) -> Result<ObsFlux> {
    let n = b.len();
    if n == 0 || n > MAX_DIM || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Operator(format!("flux direction {b:?}")));
    }
    let mut bv = Vector::default();
    bv[..n].copy_from_slice(b);
    Ok(ObsFlux { n, b: bv })
}

/// Nodal `(x, u, Du, D^2u)` of a field.
pub(crate) fn jets2(u: &ScalarField) -> Vec<Jet2> {
    let grid = u.grid();
    let n = grid.dim();
    let d1 = diff(u, 1).expect("order 1 is always supported");
    let d2 = diff(u, 2).expect("order 2 is always supported");
    (0..grid.len())
        .map(|i| {
            let mut s = Jet2 {
                x: grid.coords(i),
                r: u.values()[i],
                ..Default::default()
            };
            for slot in d1.slots() {
                let a = axis_of(slot.counts);
                s.p[a] = slot.values[i];
            }
            for slot in d2.slots() {
                let (a, b) = pair_of(slot.counts, n);
                s.hess[a][b] = slot.values[i];
                s.hess[b][a] = slot.values[i];
            }
            s
        })
        .collect()
}

/// `(x, u, Du)` at the given nodes.
pub(crate) fn jets1(u: &ScalarField, nodes: &[usize]) -> Vec<Jet1> {
    let grid = u.grid();
    let d1 = diff(u, 1).expect("order 1 is always supported");
    nodes
        .iter()
        .map(|&i| {
            let mut s = Jet1 {
                x: grid.coords(i),
                r: u.values()[i],
                ..Default::default()
            };
            for slot in d1.slots() {
                s.p[axis_of(slot.counts)] = slot.values[i];
            }
            s
        })
        .collect()
}

pub(crate) fn axis_of(counts: [usize; MAX_DIM]) -> usize {
    if counts[0] == 1 {
        0
    } else {
        1
    }
}

pub(crate) fn pair_of(counts: [usize; MAX_DIM], n: usize) -> (usize, usize) {
    match (n, counts) {
        (_, [2, 0]) => (0, 0),
        (_, [1, 1]) => (0, 1),
        _ => (1, 1),
    }
}

pub(crate) fn check_dims(
    grid: &Grid,
    f: Option<&dyn OperatorF>,
    k: Option<&dyn OperatorK>,
) -> Result<()> {
    let n = grid.dim();
    if let Some(d) = f.and_then(|f| f.dim()) {
        if d != n {
            return Err(Error::Mismatch(format!(
                "operator F is {d}-dimensional, grid is {n}"
            )));
        }
    }
    if let Some(d) = k.and_then(|k| k.dim()) {
        if d != n {
            return Err(Error::Mismatch(format!(
                "operator K is {d}-dimensional, grid is {n}"
            )));
        }
    }
    Ok(())
}

/// `F[u] = F(., u, Du, D^2u)` at every node.
pub fn eval_f(op: &dyn OperatorF, u: &ScalarField) -> Result<ScalarField> {
    check_dims(u.grid(), Some(op), None)?;
    let values = jets2(u).iter().map(|s| op.eval(s)).collect();
    Ok(ScalarField::from_raw(Arc::clone(u.grid()), values))
}

/// Nodal partials of `F` along `u`.
#[derive(Debug, Clone)]
pub struct SourcePartialFields {
    pub r: ScalarField,
    pub p: TensorField,
    pub hess: TensorField,
}

pub fn eval_f_partials(op: &dyn OperatorF, u: &ScalarField) -> Result<SourcePartialFields> {
    let grid = u.grid();
    check_dims(grid, Some(op), None)?;
    let n = grid.dim();
    let parts: Vec<SourcePartials> = jets2(u).iter().map(|s| op.partials(s)).collect();
    let r = ScalarField::from_raw(Arc::clone(grid), parts.iter().map(|q| q.r).collect());
    let p_slots = slots(n, 1)
        .into_iter()
        .map(|(counts, multiplicity)| {
            let a = axis_of(counts);
            TensorSlot {
                counts,
                multiplicity,
                values: parts.iter().map(|q| q.p[a]).collect(),
            }
        })
        .collect();
    let x_slots = slots(n, 2)
        .into_iter()
        .map(|(counts, multiplicity)| {
            let (a, b) = pair_of(counts, n);
            TensorSlot {
                counts,
                multiplicity,
                values: parts.iter().map(|q| q.hess[a][b]).collect(),
            }
        })
        .collect();
    Ok(SourcePartialFields {
        r,
        p: TensorField::new(Arc::clone(grid), 1, p_slots)?,
        hess: TensorField::new(Arc::clone(grid), 2, x_slots)?,
    })
}

fn check_measurement(u: &ScalarField, ks: &MeasurementSet) -> Result<()> {
    if let Some(&i) = ks.nodes().iter().find(|&&i| i >= u.grid().len()) {
        return Err(Error::Measurement(format!(
            "measurement node {i} outside grid of {} nodes",
            u.grid().len()
        )));
    }
    Ok(())
}

/// `K[u]` at the measurement nodes.
pub fn eval_k(op: &dyn OperatorK, u: &ScalarField, ks: &MeasurementSet) -> Result<Vec<f64>> {
    check_dims(u.grid(), None, Some(op))?;
    check_measurement(u, ks)?;
    Ok(jets1(u, ks.nodes()).iter().map(|s| op.eval(s)).collect())
}

/// `(K_r[u], K_p[u])` at the measurement nodes.
pub fn eval_k_partials(
    op: &dyn OperatorK,
    u: &ScalarField,
    ks: &MeasurementSet,
) -> Result<(Vec<f64>, Vec<Vector>)> {
    check_dims(u.grid(), None, Some(op))?;
    check_measurement(u, ks)?;
    Ok(jets1(u, ks.nodes())
        .iter()
        .map(|s| {
            let q = op.partials(s);
            (q.r, q.p)
        })
        .unzip())
}
