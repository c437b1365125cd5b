//! Uniform log-price / log-variance lattices and real fields sampled on them.
//!
//! Storage is row-major with `x` outer and `y` inner: point `(i, j)` lives at
//! flat index `i * ny + j`. Operator matrices use the same ordering.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGrid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl LogGrid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        Self::named(x_min, x_max, n, ("x_min", "x_max", "nx"))
    }

    fn named(min: f64, max: f64, n: usize, names: (&'static str, &'static str, &'static str)) -> Result<Self> {
        let (min_name, max_name, n_name) = names;
        if !min.is_finite() {
            return Err(Error::InvalidGrid { field: min_name, reason: "must be finite".into() });
        }
        if !max.is_finite() {
            return Err(Error::InvalidGrid { field: max_name, reason: "must be finite".into() });
        }
        if n < 5 {
            return Err(Error::InvalidGrid { field: n_name, reason: format!("must be at least 5, got {n}") });
        }
        if max <= min {
            return Err(Error::InvalidGrid { field: max_name, reason: format!("must exceed {min_name}") });
        }
        let h = (max - min) / (n - 1) as f64;
        Ok(Self { x_min: min, x_max: max, n, h })
    }

    pub fn min(&self) -> f64 {
        self.x_min
    }

    pub fn max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }

    /// Cell index `i` with `point(i) <= x <= point(i + 1)` and the fractional offset.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(self.x_min..=self.x_max).contains(&x) {
            return None;
        }
        let s = (x - self.x_min) / self.h;
        let i = (s.floor() as usize).min(self.n - 2);
        Some((i, s - i as f64))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGrid2D {
    x_axis: LogGrid1D,
    y_axis: LogGrid1D,
}

impl LogGrid2D {
    pub fn new(x_axis: LogGrid1D, y_axis: LogGrid1D) -> Self {
        Self { x_axis, y_axis }
    }

    pub fn x_axis(&self) -> &LogGrid1D {
        &self.x_axis
    }

    pub fn y_axis(&self) -> &LogGrid1D {
        &self.y_axis
    }
}

/// Builds the `nx * ny` lattice over `[x_min, x_max] x [y_min, y_max]`.
pub fn make_grid_2d(x_min: f64, x_max: f64, nx: usize, y_min: f64, y_max: f64, ny: usize) -> Result<LogGrid2D> {
    let x = LogGrid1D::named(x_min, x_max, nx, ("x_min", "x_max", "nx"))?;
    let y = LogGrid1D::named(y_min, y_max, ny, ("y_min", "y_max", "ny"))?;
    Ok(LogGrid2D::new(x, y))
}

/// Log-price axis `ln S0 +/- 5 sigma sqrt(T)`.
pub fn default_x_axis(s0: f64, sigma: f64, maturity: f64, n: usize) -> Result<LogGrid1D> {
    let half = 5.0 * sigma * maturity.sqrt();
    LogGrid1D::new(s0.ln() - half, s0.ln() + half, n)
}

/// Two-dimensional box `ln S0 +/- 5 sqrt(V0 T)` by `[ln V0 - 5, ln V0 + 2]`.
pub fn default_grid_2d(s0: f64, v0: f64, maturity: f64, nx: usize, ny: usize) -> Result<LogGrid2D> {
    let x = default_x_axis(s0, v0.sqrt(), maturity, nx)?;
    let y = LogGrid1D::named(v0.ln() - 5.0, v0.ln() + 2.0, ny, ("y_min", "y_max", "ny"))?;
    Ok(LogGrid2D::new(x, y))
}

/// Either a log-price line or a log-price by log-variance plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    Line(LogGrid1D),
    Plane(LogGrid2D),
}

impl From<LogGrid1D> for Grid {
    fn from(g: LogGrid1D) -> Self {
        Grid::Line(g)
    }
}

impl From<LogGrid2D> for Grid {
    fn from(g: LogGrid2D) -> Self {
        Grid::Plane(g)
    }
}

impl Grid {
    pub fn x_axis(&self) -> &LogGrid1D {
        match self {
            Grid::Line(g) => g,
            Grid::Plane(g) => &g.x_axis,
        }
    }

    pub fn y_axis(&self) -> Option<&LogGrid1D> {
        match self {
            Grid::Line(_) => None,
            Grid::Plane(g) => Some(&g.y_axis),
        }
    }

    pub fn as_plane(&self) -> Option<&LogGrid2D> {
        match self {
            Grid::Line(_) => None,
            Grid::Plane(g) => Some(g),
        }
    }

    pub fn nx(&self) -> usize {
        self.x_axis().len()
    }

    pub fn ny(&self) -> usize {
        self.y_axis().map_or(1, |y| y.len())
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny() + j
    }

    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.ny(), k % self.ny())
    }

    /// Coordinates of flat index `k`; `y` is 0 on a line.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.split(k);
        let x = self.x_axis().point(i);
        let y = self.y_axis().map_or(0.0, |a| a.point(j));
        (x, y)
    }

    /// True when `k` is at least `margin` points from every boundary.
    pub fn is_interior(&self, k: usize, margin: usize) -> bool {
        let (i, j) = self.split(k);
        let inside = |idx: usize, n: usize| idx >= margin && idx + margin < n;
        inside(i, self.nx()) && self.y_axis().is_none_or(|y| inside(j, y.len()))
    }

    pub fn interior_indices(&self, margin: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_interior(k, margin)).collect()
    }
}

/// Real values, one per grid point, in the grid's row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: impl Into<Grid>, values: Vec<f64>) -> Result<Self> {
        let grid = grid.into();
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.split(k);
            return Err(Error::NonFiniteSample { i, j, value: values[k] });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// `a * self + b * other`, pointwise.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(u, v)| a * u + b * v).collect();
        GridFunction::new(self.grid, values)
    }

    /// Max of `|self - other|` over points `margin` away from the boundary.
    pub fn max_abs_diff(&self, other: &GridFunction, margin: usize) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .grid
            .interior_indices(margin)
            .into_iter()
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max))
    }

    /// Max of `|self|` over points `margin` away from the boundary.
    pub fn max_abs(&self, margin: usize) -> f64 {
        self.grid
            .interior_indices(margin)
            .into_iter()
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    /// Linear (line) or bilinear (plane) interpolation.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        let out = || Error::OutOfBox { x, y };
        let (i, fx) = self.grid.x_axis().locate(x).ok_or_else(out)?;
        match self.grid.y_axis() {
            None => Ok((1.0 - fx) * self.at(i, 0) + fx * self.at(i + 1, 0)),
            Some(ya) => {
                let (j, fy) = ya.locate(y).ok_or_else(out)?;
                let lo = (1.0 - fy) * self.at(i, j) + fy * self.at(i, j + 1);
                let hi = (1.0 - fy) * self.at(i + 1, j) + fy * self.at(i + 1, j + 1);
                Ok((1.0 - fx) * lo + fx * hi)
            }
        }
    }

    /// CSV with header `x,y,value`, row-major, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 72);
        out.push_str("x,y,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = self.grid.coords(k);
            let _ = writeln!(out, "{x:.16e},{y:.16e},{v:.16e}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Evaluates `f(x, y)` at every grid point.
pub fn sample(grid: impl Into<Grid>, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
    let grid = grid.into();
    let values = (0..grid.len())
        .map(|k| {
            let (x, y) = grid.coords(k);
            f(x, y)
        })
        .collect();
    GridFunction::new(grid, values)
}
