//! Uniform tensor grids over rectangles, nodal fields, and measurement sets.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::Stencil1D;

/// Largest spatial dimension supported.
pub const MAX_DIM: usize = 2;
/// Highest derivative order with precomputed stencils (`[n/2] + 3` for `n = 2`).
pub const MAX_ORDER: usize = 4;
/// Node count of the widest stencil.
pub const MIN_RESOLUTION: usize = 5;

/// Closed interval `[lo, hi]` along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Uniform tensor grid over a rectangle in one or two dimensions.
///
/// Nodes are numbered lexicographically with the first axis fastest.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    extents: [Interval; MAX_DIM],
    resolution: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
    weights: Vec<f64>,
    boundary: Vec<bool>,
    /// `stencils[axis][order - 1]`
    stencils: [Vec<Stencil1D>; MAX_DIM],
    /// Base index of every grid line parallel to each axis.
    lines: [Vec<usize>; MAX_DIM],
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.extents == other.extents
            && self.resolution == other.resolution
    }
}

/// Builds a classified grid with trapezoid cell weights.
pub fn build_grid(extents: &[Interval], resolution: &[usize]) -> Result<Grid> {
    Grid::new(extents, resolution)
}

impl Grid {
    pub fn new(extents: &[Interval], resolution: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Grid(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        if resolution.len() != dim {
            return Err(Error::Grid(format!(
                "{} extents but {} resolutions",
                dim,
                resolution.len()
            )));
        }
        let mut ext = [Interval::new(0.0, 0.0); MAX_DIM];
        let mut res = [1usize; MAX_DIM];
        let mut spacing = [0.0; MAX_DIM];
        for a in 0..dim {
            let iv = extents[a];
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.hi > iv.lo) {
                return Err(Error::Grid(format!(
                    "axis {a}: extent [{}, {}] is not a proper interval",
                    iv.lo, iv.hi
                )));
            }
            if resolution[a] < MIN_RESOLUTION {
                return Err(Error::Grid(format!(
                    "axis {a}: resolution {} is below the stencil width {MIN_RESOLUTION}",
                    resolution[a]
                )));
            }
            ext[a] = iv;
            res[a] = resolution[a];
            spacing[a] = iv.length() / (resolution[a] - 1) as f64;
        }

        let len: usize = res.iter().product();
        let mut weights = vec![1.0; len];
        let mut boundary = vec![false; len];
        for (idx, (w, b)) in weights.iter_mut().zip(boundary.iter_mut()).enumerate() {
            let ij = Self::unravel_with(&res, idx);
            for a in 0..dim {
                let edge = ij[a] == 0 || ij[a] == res[a] - 1;
                *w *= if edge { 0.5 * spacing[a] } else { spacing[a] };
                *b |= edge;
            }
        }

        let stencils = std::array::from_fn(|a| {
            if a < dim {
                (1..=MAX_ORDER)
                    .map(|k| Stencil1D::derivative(k, res[a], spacing[a]))
                    .collect()
            } else {
                Vec::new()
            }
        });

        let lines = [
            (0..res[1]).map(|j| j * res[0]).collect(),
            (0..res[0]).collect(),
        ];

        Ok(Self {
            dim,
            extents: ext,
            resolution: res,
            spacing,
            weights,
            boundary,
            stencils,
            lines,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[Interval] {
        &self.extents[..self.dim]
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Trapezoid cell weights; they sum to the Lebesgue volume of the rectangle.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn volume(&self) -> f64 {
        self.extents().iter().map(Interval::length).product()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary[idx]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.boundary[i])
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| !self.boundary[i])
    }

    /// Highest derivative order in the viscosity term, `[n/2] + 3`.
    pub fn top_order(&self) -> usize {
        self.dim / 2 + 3
    }

    pub fn stencil(&self, axis: usize, order: usize) -> &Stencil1D {
        &self.stencils[axis][order - 1]
    }

    pub(crate) fn lines(&self, axis: usize) -> &[usize] {
        &self.lines[axis]
    }

    /// Index distance between neighbouring nodes along `axis`.
    pub(crate) fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.resolution[0]
        }
    }

    fn unravel_with(res: &[usize; MAX_DIM], idx: usize) -> [usize; MAX_DIM] {
        [idx % res[0], idx / res[0]]
    }

    /// Per-axis integer coordinates of a node.
    pub fn unravel(&self, idx: usize) -> [usize; MAX_DIM] {
        Self::unravel_with(&self.resolution, idx)
    }

    pub fn ravel(&self, ij: [usize; MAX_DIM]) -> usize {
        ij[0] + self.resolution[0] * ij[1]
    }

    /// Physical coordinates of a node; unused axes are zero.
    pub fn coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let ij = self.unravel(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.extents[a].lo + ij[a] as f64 * self.spacing[a];
        }
        x
    }

    /// Index of the grid line nearest to `x` along `axis`, clamped into the grid.
    pub fn snap_axis(&self, axis: usize, x: f64) -> usize {
        let t = (x - self.extents[axis].lo) / self.spacing[axis];
        (t.round().max(0.0) as usize).min(self.resolution[axis] - 1)
    }

    /// Nearest node to a point and the Euclidean distance to it.
    pub fn snap(&self, x: &[f64]) -> (usize, f64) {
        let mut ij = [0usize; MAX_DIM];
        for a in 0..self.dim {
            ij[a] = self.snap_axis(a, x[a]);
        }
        let idx = self.ravel(ij);
        let c = self.coords(idx);
        let d = (0..self.dim)
            .map(|a| (c[a] - x[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        (idx, d)
    }

    /// Euclidean distance between two nodes.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords(i), self.coords(j));
        (0..self.dim)
            .map(|k| (a[k] - b[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Sample a function at every node.
    pub fn sample(self: &Arc<Self>, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let values = (0..self.len())
            .map(|i| {
                let x = self.coords(i);
                f(&x[..self.dim])
            })
            .collect();
        ScalarField {
            grid: Arc::clone(self),
            values,
        }
    }
}

/// Nodal values of a scalar function on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Mismatch(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Builds a field without the finiteness check, for internal intermediates.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Copy of `self` with boundary nodes overwritten by `g`.
    pub fn with_boundary_of(&self, g: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        for i in self.grid.boundary_nodes() {
            out.values[i] = g.values[i];
        }
        out
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Hausdorff dimension label of a measurement set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kappa {
    /// Finite point set with counting measure.
    Points,
    /// Axis-aligned segment with arclength weights.
    Curve,
    /// Rectangular subdomain with cell weights.
    Region,
}

impl Kappa {
    pub fn dimension(&self, n: usize) -> usize {
        match self {
            Kappa::Points => 0,
            Kappa::Curve => 1,
            Kappa::Region => n,
        }
    }
}

/// Discrete carrier of the measurement set together with its Hausdorff quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    nodes: Vec<usize>,
    weights: Vec<f64>,
    kappa: Kappa,
    /// Largest distance from a requested location to the node it was snapped to.
    snap_distance: f64,
}

impl MeasurementSet {
    /// Builds a set from explicit node indices and weights.
    pub fn new(grid: &Grid, nodes: Vec<usize>, weights: Vec<f64>, kappa: Kappa) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Measurement("measurement set is empty".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::Measurement(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if let Some(&i) = nodes.iter().find(|&&i| i >= grid.len()) {
            return Err(Error::Measurement(format!(
                "node {i} outside grid of {} nodes",
                grid.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Measurement(
                "weights must be strictly positive".into(),
            ));
        }
        if kappa == Kappa::Points && weights.iter().any(|&w| w != 1.0) {
            return Err(Error::Measurement(
                "point sets carry the counting measure (unit weights)".into(),
            ));
        }
        let mut seen = nodes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != nodes.len() {
            return Err(Error::Measurement("duplicate nodes".into()));
        }
        Ok(Self {
            nodes,
            weights,
            kappa,
            snap_distance: 0.0,
        })
    }

    /// Point set: each location is snapped to its nearest node; coincident snaps merge.
    pub fn points(grid: &Grid, locations: &[Vec<f64>]) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut snap: f64 = 0.0;
        for x in locations {
            if x.len() != grid.dim() {
                return Err(Error::Measurement(format!(
                    "point {x:?} has {} coordinates, grid has {}",
                    x.len(),
                    grid.dim()
                )));
            }
            let (idx, d) = grid.snap(x);
            snap = snap.max(d);
            if !nodes.contains(&idx) {
                nodes.push(idx);
            }
        }
        let w = vec![1.0; nodes.len()];
        let mut set = Self::new(grid, nodes, w, Kappa::Points)?;
        set.snap_distance = snap;
        Ok(set)
    }

    /// Axis-aligned segment from `a` to `b` with trapezoid arclength weights.
    pub fn segment(grid: &Grid, a: &[f64], b: &[f64]) -> Result<Self> {
        let n = grid.dim();
        if a.len() != n || b.len() != n {
            return Err(Error::Measurement(
                "segment endpoints have wrong dimension".into(),
            ));
        }
        let moving: Vec<usize> = (0..n).filter(|&k| a[k] != b[k]).collect();
        if moving.len() != 1 {
            return Err(Error::Measurement(
                "segment must vary along exactly one axis".into(),
            ));
        }
        let axis = moving[0];
        let mut ij = [0usize; MAX_DIM];
        let mut snap: f64 = 0.0;
        for k in 0..n {
            if k != axis {
                ij[k] = grid.snap_axis(k, a[k]);
                let x = grid.extents()[k].lo + ij[k] as f64 * grid.spacing()[k];
                snap = snap.max((x - a[k]).abs());
            }
        }
        let (lo, hi) = (a[axis].min(b[axis]), a[axis].max(b[axis]));
        let (i0, i1) = (grid.snap_axis(axis, lo), grid.snap_axis(axis, hi));
        if i1 <= i0 {
            return Err(Error::Measurement(
                "segment shorter than one grid cell".into(),
            ));
        }
        let h = grid.spacing()[axis];
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in i0..=i1 {
            ij[axis] = i;
            nodes.push(grid.ravel(ij));
            weights.push(if i == i0 || i == i1 { 0.5 * h } else { h });
        }
        let mut set = Self::new(grid, nodes, weights, Kappa::Curve)?;
        set.snap_distance = snap;
        Ok(set)
    }

    /// Rectangular subdomain `Π [lo_k, hi_k]` snapped to grid lines, with trapezoid weights.
    pub fn region(grid: &Grid, bounds: &[Interval]) -> Result<Self> {
        let n = grid.dim();
        if bounds.len() != n {
            return Err(Error::Measurement(
                "region bounds have wrong dimension".into(),
            ));
        }
        let mut range = [(0usize, 0usize); MAX_DIM];
        for k in 0..n {
            let (i0, i1) = (
                grid.snap_axis(k, bounds[k].lo),
                grid.snap_axis(k, bounds[k].hi),
            );
            if i1 <= i0 {
                return Err(Error::Measurement(format!(
                    "region thinner than one grid cell along axis {k}"
                )));
            }
            range[k] = (i0, i1);
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let (j0, j1) = if n == 2 { range[1] } else { (0, 0) };
        for j in j0..=j1 {
            for i in range[0].0..=range[0].1 {
                let mut w = 1.0;
                for (k, &c) in [i, j].iter().enumerate().take(n) {
                    let h = grid.spacing()[k];
                    w *= if c == range[k].0 || c == range[k].1 {
                        0.5 * h
                    } else {
                        h
                    };
                }
                nodes.push(grid.ravel([i, j]));
                weights.push(w);
            }
        }
        Self::new(grid, nodes, weights, Kappa::Region)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kappa(&self) -> Kappa {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `H^kappa(K)`, the sum of the quadrature weights.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn snap_distance(&self) -> f64 {
        self.snap_distance
    }

    /// Restriction of a nodal field to the measurement nodes.
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&i| values[i]).collect()
    }
}
