//! Finite-difference stencils on uniform axes and their tensor-product assembly.

use crate::grid::{Grid, LogGrid1D};
use crate::sparse::CsrMatrix;

use super::BoundaryPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    First,
    Second,
}

/// Weights of one derivative row on a single axis.
///
/// Weights are exact signed multiples of `1/(2h)` or `1/h^2`, so every interior
/// row sums to exactly zero in floating point.
pub fn axis_row(axis: &LogGrid1D, deriv: Derivative, i: usize, policy: BoundaryPolicy) -> Vec<(usize, f64)> {
    let n = axis.len();
    let h = axis.spacing();
    let v = 0.5 / h;
    let w = 1.0 / (h * h);
    let interior = i >= 1 && i + 1 < n;
    match (deriv, interior, policy) {
        (Derivative::First, true, _) => vec![(i - 1, -v), (i + 1, v)],
        (Derivative::Second, true, _) => vec![(i - 1, w), (i, -2.0 * w), (i + 1, w)],
        (Derivative::First, false, BoundaryPolicy::OneSidedInterior) => {
            if i == 0 {
                vec![(0, -3.0 * v), (1, 4.0 * v), (2, -v)]
            } else {
                vec![(n - 3, v), (n - 2, -4.0 * v), (n - 1, 3.0 * v)]
            }
        }
        (Derivative::Second, false, BoundaryPolicy::OneSidedInterior) => {
            if i == 0 {
                vec![(0, 2.0 * w), (1, -5.0 * w), (2, 4.0 * w), (3, -w)]
            } else {
                vec![(n - 4, -w), (n - 3, 4.0 * w), (n - 2, -5.0 * w), (n - 1, 2.0 * w)]
            }
        }
        (Derivative::First, false, BoundaryPolicy::ZeroPadded) => {
            if i == 0 {
                vec![(1, v)]
            } else {
                vec![(n - 2, -v)]
            }
        }
        (Derivative::Second, false, BoundaryPolicy::ZeroPadded) => {
            if i == 0 {
                vec![(0, -2.0 * w), (1, w)]
            } else {
                vec![(n - 2, w), (n - 1, -2.0 * w)]
            }
        }
    }
}

/// `diag(coef) * (Dx (x) Dy)` where a missing derivative means the identity on that axis.
pub fn tensor_term(
    grid: &Grid,
    dx: Option<Derivative>,
    dy: Option<Derivative>,
    policy: BoundaryPolicy,
    coef: impl Fn(f64, f64) -> f64,
) -> CsrMatrix {
    let x_axis = grid.x_axis();
    let y_axis = grid.y_axis();
    assert!(dy.is_none() || y_axis.is_some(), "y derivative on a one-dimensional grid");
    let rows = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.split(k);
            let (x, y) = grid.coords(k);
            let c = coef(x, y);
            let wx = dx.map_or_else(|| vec![(i, 1.0)], |d| axis_row(x_axis, d, i, policy));
            let wy = match (dy, y_axis) {
                (Some(d), Some(ya)) => axis_row(ya, d, j, policy),
                _ => vec![(j, 1.0)],
            };
            let mut row = Vec::with_capacity(wx.len() * wy.len());
            for &(ci, a) in &wx {
                for &(cj, b) in &wy {
                    row.push((grid.index(ci, cj), c * (a * b)));
                }
            }
            row
        })
        .collect();
    CsrMatrix::from_rows(rows)
}
