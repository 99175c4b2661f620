//! Derivative tensors of nodal fields, symmetric-tensor algebra, and normalised norms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, MAX_DIM};

/// Per-axis derivative counts of one distinct slot of a symmetric tensor.
///
/// The slot `(a_1 <= ... <= a_k)` is identified by how many indices equal each axis.
pub type Counts = [usize; MAX_DIM];

/// Distinct slots of the symmetric order-`k` tensors over `R^n`, with multinomial multiplicities.
pub fn slots(n: usize, k: usize) -> Vec<(Counts, f64)> {
    match n {
        1 => vec![([k, 0], 1.0)],
        2 => (0..=k)
            .rev()
            .map(|kx| ([kx, k - kx], binomial(k, kx)))
            .collect(),
        _ => unreachable!("dimension checked at grid construction"),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Mixed partial derivative `D^counts` of nodal values.
pub fn partial(grid: &Grid, values: &[f64], counts: Counts) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut tmp = vec![0.0; values.len()];
    for axis in 0..grid.dim() {
        if counts[axis] == 0 {
            continue;
        }
        grid.stencil(axis, counts[axis]).apply_axis(
            &cur,
            &mut tmp,
            grid.stride(axis),
            grid.lines(axis),
        );
        std::mem::swap(&mut cur, &mut tmp);
    }
    cur
}

/// Transpose of [`partial`]: `<partial(u), v> = <u, partial_adjoint(v)>` in the plain
/// Euclidean pairing of nodal vectors.
pub fn partial_adjoint(grid: &Grid, values: &[f64], counts: Counts) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut tmp = vec![0.0; values.len()];
    for axis in (0..grid.dim()).rev() {
        if counts[axis] == 0 {
            continue;
        }
        grid.stencil(axis, counts[axis]).apply_axis_transpose(
            &cur,
            &mut tmp,
            grid.stride(axis),
            grid.lines(axis),
        );
        std::mem::swap(&mut cur, &mut tmp);
    }
    cur
}

/// One distinct slot of a symmetric tensor field.
#[derive(Debug, Clone)]
pub struct TensorSlot {
    pub counts: Counts,
    pub multiplicity: f64,
    pub values: Vec<f64>,
}

/// Nodal field of fully symmetric order-`k` tensors, each slot stored once.
#[derive(Debug, Clone)]
pub struct TensorField {
    grid: Arc<Grid>,
    order: usize,
    slots: Vec<TensorSlot>,
}

impl TensorField {
    pub fn new(grid: Arc<Grid>, order: usize, slots: Vec<TensorSlot>) -> Result<Self> {
        let n = grid.dim();
        let expected = self::slots(n, order);
        if slots.len() != expected.len()
            || slots
                .iter()
                .zip(&expected)
                .any(|(s, (c, _))| s.counts != *c || s.values.len() != grid.len())
        {
            return Err(Error::Mismatch(format!(
                "slot layout does not match order {order} in dimension {n}"
            )));
        }
        let slots = slots
            .into_iter()
            .zip(expected)
            .map(|(mut s, (_, m))| {
                s.multiplicity = m;
                s
            })
            .collect();
        Ok(Self { grid, order, slots })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn slots(&self) -> &[TensorSlot] {
        &self.slots
    }

    /// Value of the full tensor component `T_{a_1 ... a_k}` at a node.
    pub fn component(&self, node: usize, index: &[usize]) -> f64 {
        let mut counts = [0usize; MAX_DIM];
        for &a in index {
            counts[a] += 1;
        }
        self.slots
            .iter()
            .find(|s| s.counts == counts)
            .map(|s| s.values[node])
            .unwrap_or(0.0)
    }
}

/// Order-`k` derivative tensor `D^k u`.
pub fn diff(u: &ScalarField, k: usize) -> Result<TensorField> {
    let grid = u.grid();
    let max = grid.top_order();
    if k == 0 || k > max {
        return Err(Error::OrderOutOfRange { order: k, max });
    }
    let slots = slots(grid.dim(), k)
        .into_iter()
        .map(|(counts, multiplicity)| TensorSlot {
            counts,
            multiplicity,
            values: partial(grid, u.values(), counts),
        })
        .collect();
    Ok(TensorField {
        grid: Arc::clone(grid),
        order: k,
        slots,
    })
}

/// Pointwise `T : S`, summing over all `n^k` index tuples via slot multiplicities.
pub fn tensor_dot(t: &TensorField, s: &TensorField) -> Result<ScalarField> {
    if t.order != s.order {
        return Err(Error::Mismatch(format!(
            "tensor orders {} and {}",
            t.order, s.order
        )));
    }
    if !(Arc::ptr_eq(&t.grid, &s.grid) || *t.grid == *s.grid) {
        return Err(Error::Mismatch(
            "tensor fields live on different grids".into(),
        ));
    }
    let mut out = vec![0.0; t.grid.len()];
    for (a, b) in t.slots.iter().zip(&s.slots) {
        for ((o, x), y) in out.iter_mut().zip(&a.values).zip(&b.values) {
            *o += a.multiplicity * x * y;
        }
    }
    Ok(ScalarField::from_raw(Arc::clone(&t.grid), out))
}

/// `|a|_(p) = sqrt(a^2 + p^-2)`, the smooth positive regularisation of `|a|`.
#[inline]
pub fn softabs(a: f64, p: f64) -> f64 {
    (a * a + (p * p).recip()).sqrt()
}

/// `((sum w |f|^p) / (sum w))^(1/p)`.
pub fn lp_norm_normalised(f: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::EmptyCarrier);
    }
    if f.len() != weights.len() {
        return Err(Error::Mismatch(format!(
            "{} values for {} weights",
            f.len(),
            weights.len()
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::Param {
            name: "p",
            reason: format!("{p} < 1"),
        });
    }
    Ok(lp_unchecked(f, weights, p))
}

/// Normalised `L^p` norm without argument checks; rescales by the max to avoid overflow.
pub(crate) fn lp_unchecked(f: &[f64], weights: &[f64], p: f64) -> f64 {
    let top = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, w) in f.iter().zip(weights) {
        num += w * (v.abs() / top).powf(p);
        den += w;
    }
    top * (num / den).powf(p.recip())
}

/// Weighted average of nodal values.
pub fn average(f: &[f64], weights: &[f64]) -> f64 {
    let num: f64 = f.iter().zip(weights).map(|(v, w)| v * w).sum();
    num / weights.iter().sum::<f64>()
}

/// Normalised `||D^{n̄} u||^2_{L^2}` with `n̄ = [n/2] + 3`.
pub fn highest_seminorm_sq(u: &ScalarField) -> Result<f64> {
    let d = diff(u, u.grid().top_order())?;
    let sq = tensor_dot(&d, &d)?;
    Ok(average(sq.values(), u.grid().weights()))
}
