//! One-dimensional finite-difference stencils and their tensor-product application.
//!
//! Interior nodes use centred stencils of second-order accuracy. Nodes closer
//! to the boundary than the centred half-width use a one-sided window anchored
//! at the boundary, of `min(order + 2, 5)` points, so that every row is exact
//! on polynomials of degree `order` and the widest stencil spans five nodes.

/// Finite-difference weights for the `order`-th derivative at `x0` from nodes `xs`
/// (Fornberg's recursion).
pub fn fornberg_weights(order: usize, x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n > order, "need more than {order} nodes");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    start: usize,
    weights: Vec<f64>,
}

/// Derivative operator of a fixed order on `m` equispaced nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil1D {
    order: usize,
    rows: Vec<Row>,
}

impl Stencil1D {
    pub fn derivative(order: usize, m: usize, h: f64) -> Self {
        assert!(order >= 1);
        let half = order.div_ceil(2);
        let one_sided = (order + 2).min(5);
        assert!(
            m >= one_sided.max(2 * half + 1),
            "grid too coarse for order {order}"
        );
        let scale = h.powi(-(order as i32));
        let rows = (0..m)
            .map(|i| {
                let (start, width) = if i >= half && i + half < m {
                    (i - half, 2 * half + 1)
                } else if i < half {
                    (0, one_sided)
                } else {
                    (m - one_sided, one_sided)
                };
                let xs: Vec<f64> = (0..width).map(|k| k as f64).collect();
                let weights = fornberg_weights(order, (i - start) as f64, &xs)
                    .into_iter()
                    .map(|w| w * scale)
                    .collect();
                Row { start, weights }
            })
            .collect();
        Self { order, rows }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(first column, weights)` of row `i`.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        let r = &self.rows[i];
        (r.start, &r.weights)
    }

    /// Applies the stencil along one axis of a lexicographic array.
    ///
    /// `stride` is the index distance between neighbours along the axis and
    /// `lines` enumerates the base index of every grid line parallel to it.
    pub(crate) fn apply_axis(&self, src: &[f64], dst: &mut [f64], stride: usize, lines: &[usize]) {
        for &base in lines {
            for (i, r) in self.rows.iter().enumerate() {
                let mut acc = 0.0;
                for (k, w) in r.weights.iter().enumerate() {
                    acc += w * src[base + (r.start + k) * stride];
                }
                dst[base + i * stride] = acc;
            }
        }
    }

    /// Transposed application along one axis; `dst` is overwritten.
    pub(crate) fn apply_axis_transpose(
        &self,
        src: &[f64],
        dst: &mut [f64],
        stride: usize,
        lines: &[usize],
    ) {
        for &base in lines {
            for i in 0..self.rows.len() {
                dst[base + i * stride] = 0.0;
            }
            for (i, r) in self.rows.iter().enumerate() {
                let v = src[base + i * stride];
                if v == 0.0 {
                    continue;
                }
                for (k, w) in r.weights.iter().enumerate() {
                    dst[base + (r.start + k) * stride] += w * v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_weights() {
        let w = fornberg_weights(2, 1.0, &[0.0, 1.0, 2.0]);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(4, 2.0, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        for (a, b) in w.iter().zip([1.0, -4.0, 6.0, -4.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = fornberg_weights(1, 0.0, &[0.0, 1.0, 2.0]);
        for (a, b) in w.iter().zip([-1.5, 2.0, -0.5]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rows_reproduce_monomials() {
        let m = 9;
        let h = 0.125;
        for order in 1..=4 {
            let s = Stencil1D::derivative(order, m, h);
            for deg in 0..=order {
                let u: Vec<f64> = (0..m).map(|i| (i as f64 * h).powi(deg as i32)).collect();
                for i in 0..m {
                    let (start, w) = s.row(i);
                    let d: f64 = w.iter().enumerate().map(|(k, c)| c * u[start + k]).sum();
                    let x = i as f64 * h;
                    let exact = if deg < order {
                        0.0
                    } else {
                        (1..=order).map(|k| k as f64).product::<f64>()
                            * x.powi((deg - order) as i32)
                    };
                    assert!((d - exact).abs() < 1e-8, "order {order} deg {deg} row {i}");
                }
            }
        }
    }

    #[test]
    fn widest_stencil_is_five_points() {
        for order in 1..=4 {
            let s = Stencil1D::derivative(order, 5, 0.25);
            for i in 0..5 {
                assert!(s.row(i).1.len() <= 5);
            }
        }
    }
}
