//! Discrete Hamiltonians and the operator algebra used to compare them.
//!
//! A [`LinearOperator`] is kept as an ordered sum of sparse terms (one per
//! differential block plus the `r * I` shift). Applying it sums the terms in
//! order, so blocks that vanish on a given function contribute exact zeros and
//! comparisons between Hamiltonians that share blocks are bit-exact. Products,
//! commutators and solvers work on the flattened matrix.

mod gauge;
mod hamiltonians;
pub mod stencil;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::sparse::CsrMatrix;

pub use gauge::{build_transformed_bs, transform_audit, gauge_operator, TransformAudit, GaugeField, TransformConvention};
pub use hamiltonians::{
    build_bs_hamiltonian, build_bs_hamiltonian_with_policy, build_gauge_hamiltonian, build_gauge_hamiltonian_with_policy,
    build_mg_hamiltonian, build_mg_hamiltonian_with_policy, gauge_coefficients, mg_coefficients, GaugeForm,
    TermCoefficients,
};

/// How the first and last rows of each derivative block are filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// One-sided second-order differences.
    #[default]
    OneSidedInterior,
    /// Central differences with out-of-grid neighbours taken as zero.
    ZeroPadded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub label: String,
    pub matrix: CsrMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    grid: Grid,
    terms: Vec<Term>,
    boundary: BoundaryPolicy,
    label: String,
}

impl LinearOperator {
    pub fn from_terms(
        grid: Grid,
        label: impl Into<String>,
        boundary: BoundaryPolicy,
        terms: Vec<Term>,
    ) -> Result<Self> {
        for t in &terms {
            if t.matrix.dim() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: t.matrix.dim() });
            }
            if let Some((i, j, v)) = t.matrix.triplets().find(|(_, _, v)| !v.is_finite()) {
                return Err(Error::Domain(format!("term {} has non-finite entry {v} at ({i}, {j})", t.label)));
            }
        }
        Ok(Self { grid, terms, boundary, label: label.into() })
    }

    fn single(grid: Grid, label: impl Into<String>, boundary: BoundaryPolicy, matrix: CsrMatrix) -> Result<Self> {
        let label = label.into();
        Self::from_terms(grid, label.clone(), boundary, vec![Term { label, matrix }])
    }

    pub fn identity(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Self::single(grid, "identity", BoundaryPolicy::default(), CsrMatrix::identity(grid.len())).unwrap()
    }

    pub fn zero(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Self { grid, terms: Vec::new(), boundary: BoundaryPolicy::default(), label: "zero".into() }
    }

    pub fn diagonal(grid: impl Into<Grid>, label: impl Into<String>, diag: &[f64]) -> Result<Self> {
        let grid = grid.into();
        if diag.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: diag.len() });
        }
        Self::single(grid, label, BoundaryPolicy::default(), CsrMatrix::diagonal(diag))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn boundary_policy(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn term(&self, label: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.label == label)
    }

    /// Sum of all terms as one matrix.
    pub fn matrix(&self) -> CsrMatrix {
        let mut iter = self.terms.iter();
        match iter.next() {
            None => CsrMatrix::zeros(self.grid.len()),
            Some(first) => iter.fold(first.matrix.clone(), |acc, t| acc.add(&t.matrix, 1.0)),
        }
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; self.grid.len()];
        for t in &self.terms {
            t.matrix.mul_vec_acc(f.values(), &mut out);
        }
        GridFunction::new(self.grid, out)
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `self + other`, keeping both term lists.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.grid, format!("({} + {})", self.label, other.label), self.boundary, terms)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
            .map(|op| op.with_label(format!("({} - {})", self.label, other.label)))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            terms: self
                .terms
                .iter()
                .map(|t| Term { label: t.label.clone(), matrix: t.matrix.scale(a) })
                .collect(),
            boundary: self.boundary,
            label: format!("{a}*{}", self.label),
        }
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let label = format!("{}*{}", self.label, other.label);
        Self::single(self.grid, label, self.boundary, self.matrix().matmul(&other.matrix()))
    }

    /// `diag(d) * self`, term by term.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        Self {
            grid: self.grid,
            terms: self
                .terms
                .iter()
                .map(|t| Term { label: t.label.clone(), matrix: t.matrix.scale_rows(d) })
                .collect(),
            boundary: self.boundary,
            label: self.label.clone(),
        }
    }

    /// Inverse of a diagonal operator with non-zero entries.
    pub fn inverse_diagonal(&self) -> Result<Self> {
        let d = self.matrix().as_diagonal().ok_or(Error::NotInvertibleDiagonal)?;
        if d.contains(&0.0) {
            return Err(Error::NotInvertibleDiagonal);
        }
        let inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        Self::diagonal(self.grid, format!("inv({})", self.label), &inv)
    }

    /// Splits off every term equal to `a * I`, returning the summed shift and the rest.
    pub fn split_scalar_shift(&self) -> (f64, Self) {
        let mut shift = 0.0;
        let mut rest = Vec::new();
        for t in &self.terms {
            match t.matrix.as_scalar_identity() {
                Some(a) => shift += a,
                None => rest.push(t.clone()),
            }
        }
        let op = Self { grid: self.grid, terms: rest, boundary: self.boundary, label: format!("{}-shift", self.label) };
        (shift, op)
    }

    /// Max `|M_ij - M_ji|` over `i, j` both interior.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = self.matrix();
        let inside = |k: usize| self.grid.is_interior(k, 1);
        m.triplets()
            .filter(|&(i, j, _)| inside(i) && inside(j))
            .map(|(i, j, v)| (v - m.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Max entry difference over rows at least `margin` from the boundary.
    pub fn max_entry_diff(&self, other: &Self, margin: usize) -> Result<f64> {
        self.check_grid(other)?;
        let d = self.matrix().add(&other.matrix(), -1.0);
        Ok(d.triplets()
            .filter(|&(i, _, _)| self.grid.is_interior(i, margin))
            .map(|(_, _, v)| v.abs())
            .fold(0.0, f64::max))
    }

    /// Coordinate list `row,col,value` of the flattened matrix.
    pub fn to_coo_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for (i, j, v) in self.matrix().triplets() {
            let _ = writeln!(out, "{i},{j},{v:.16e}");
        }
        out
    }
}

/// `A B - B A`.
pub fn commutator(a: &LinearOperator, b: &LinearOperator) -> Result<LinearOperator> {
    a.check_grid(b)?;
    let (ma, mb) = (a.matrix(), b.matrix());
    let m = ma.matmul(&mb).add(&mb.matmul(&ma), -1.0);
    LinearOperator::single(a.grid, format!("[{}, {}]", a.label, b.label), a.boundary, m)
}
