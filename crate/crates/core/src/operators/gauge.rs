use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::sparse::CsrMatrix;

use super::stencil::{tensor_term, Derivative};
use super::{build_bs_hamiltonian, LinearOperator, Term};

type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Gauge parameter `theta(x, y)` with caller-supplied analytic derivatives.
#[derive(Clone)]
pub struct GaugeField {
    theta: Field,
    theta_x: Field,
    theta_y: Field,
    theta_xy: Field,
    omega: f64,
    label: String,
}

impl fmt::Debug for GaugeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeField").field("label", &self.label).field("omega", &self.omega).finish()
    }
}

impl GaugeField {
    pub fn new(
        label: impl Into<String>,
        theta: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        theta_x: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        theta_y: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        theta_xy: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            theta: Arc::new(theta),
            theta_x: Arc::new(theta_x),
            theta_y: Arc::new(theta_y),
            theta_xy: Arc::new(theta_xy),
            omega: 1.0,
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("theta={c}"), move |_, _| c, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
    }

    /// `theta = ax * x + ay * y`.
    pub fn linear(ax: f64, ay: f64) -> Self {
        Self::new(format!("theta={ax}x+{ay}y"), move |x, y| ax * x + ay * y, move |_, _| ax, move |_, _| ay, |_, _| 0.0)
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Takes `omega` from the model parameters.
    pub fn for_params(self, params: &ModelParams) -> Self {
        self.with_omega(params.omega)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn theta(&self, x: f64, y: f64) -> f64 {
        (self.theta)(x, y)
    }

    pub fn theta_x(&self, x: f64, y: f64) -> f64 {
        (self.theta_x)(x, y)
    }

    pub fn theta_y(&self, x: f64, y: f64) -> f64 {
        (self.theta_y)(x, y)
    }

    pub fn theta_xy(&self, x: f64, y: f64) -> f64 {
        (self.theta_xy)(x, y)
    }

    /// `omega * theta` at every grid point, checked to stay within exp range.
    fn exponents(&self, grid: &Grid) -> Result<Vec<f64>> {
        let e: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                self.omega * self.theta(x, y)
            })
            .collect();
        let max = e.iter().map(|v| v.abs()).fold(0.0, f64::max);
        // ln(f64::MAX); beyond it either U or U^-1 is not representable.
        if !(max <= f64::MAX.ln()) {
            return Err(Error::GaugeOverflow { max_abs_exponent: max });
        }
        for k in 0..grid.len() {
            let (x, y) = grid.coords(k);
            let d = [self.theta_x(x, y), self.theta_y(x, y), self.theta_xy(x, y)];
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("gauge derivatives not finite at ({x}, {y})")));
            }
        }
        Ok(e)
    }
}

/// Diagonal `U = exp(omega * theta)`.
pub fn gauge_operator(gauge: &GaugeField, grid: impl Into<Grid>) -> Result<LinearOperator> {
    let grid = grid.into();
    let diag: Vec<f64> = gauge.exponents(&grid)?.into_iter().map(f64::exp).collect();
    LinearOperator::diagonal(grid, format!("U[{}]", gauge.label), &diag)
}

/// How `U` acts on `H_BS`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformConvention {
    /// `H_BS + v w (1 + w) theta_x^2 / 2 + v w theta_x dx + w (v/2 - r) theta_x`.
    Literal,
    /// `U^-1 H_BS U`.
    LeftConjugation,
    /// `U H_BS U^-1`.
    RightConjugation,
}

fn conjugate(op: &LinearOperator, exponents: &[f64], sign: f64) -> Result<LinearOperator> {
    // Entry (i, j) of U^-1 M U is m_ij * exp(e_j - e_i); computing the ratio as
    // one exponential keeps constant gauges exact.
    let terms = op
        .terms()
        .iter()
        .map(|t| {
            let rows = (0..t.matrix.dim())
                .map(|i| {
                    t.matrix
                        .row(i)
                        .map(|(j, v)| (j, v * (sign * (exponents[j] - exponents[i])).exp()))
                        .collect()
                })
                .collect();
            Term { label: t.label.clone(), matrix: CsrMatrix::from_rows(rows) }
        })
        .collect();
    LinearOperator::from_terms(*op.grid(), op.label(), op.boundary_policy(), terms)
}

pub fn build_transformed_bs(
    params: &ModelParams,
    gauge: &GaugeField,
    grid: impl Into<Grid>,
    convention: TransformConvention,
) -> Result<LinearOperator> {
    let grid = grid.into();
    let h = build_bs_hamiltonian(params, grid)?;
    let exponents = gauge.exponents(&grid)?;
    let line = grid.y_axis().is_none();
    let var = |y: f64| if line { params.sigma * params.sigma } else { params.variance_at(y) };
    let w = gauge.omega;
    let r = params.r;
    let op = match convention {
        TransformConvention::LeftConjugation => conjugate(&h, &exponents, 1.0)?,
        TransformConvention::RightConjugation => conjugate(&h, &exponents, -1.0)?,
        TransformConvention::Literal => {
            let policy = h.boundary_policy();
            let potential: Vec<f64> = (0..grid.len())
                .map(|k| {
                    let (x, y) = grid.coords(k);
                    let tx = gauge.theta_x(x, y);
                    let v = var(y);
                    0.5 * v * w * (1.0 + w) * tx * tx + w * (0.5 * v - r) * tx
                })
                .collect();
            let transport = tensor_term(&grid, Some(Derivative::First), None, policy, |x, y| var(y) * w * gauge.theta_x(x, y));
            let mut terms = h.terms().to_vec();
            terms.push(Term { label: "gauge_dx".into(), matrix: transport });
            terms.push(Term { label: "gauge_potential".into(), matrix: CsrMatrix::diagonal(&potential) });
            LinearOperator::from_terms(grid, "H_BS", policy, terms)?
        }
    };
    let tag = match convention {
        TransformConvention::Literal => "literal",
        TransformConvention::LeftConjugation => "U^-1 H U",
        TransformConvention::RightConjugation => "U H U^-1",
    };
    Ok(op.with_label(format!("H_BS[{tag}; {}]", gauge.label)))
}

/// Entrywise interior discrepancies between the three transformation conventions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformAudit {
    pub literal_vs_left: f64,
    pub literal_vs_right: f64,
    pub left_vs_right: f64,
}

pub fn transform_audit(params: &ModelParams, gauge: &GaugeField, grid: impl Into<Grid>) -> Result<TransformAudit> {
    let grid = grid.into();
    let build = |c| build_transformed_bs(params, gauge, grid, c);
    let literal = build(TransformConvention::Literal)?;
    let left = build(TransformConvention::LeftConjugation)?;
    let right = build(TransformConvention::RightConjugation)?;
    Ok(TransformAudit {
        literal_vs_left: literal.max_entry_diff(&left, 1)?,
        literal_vs_right: literal.max_entry_diff(&right, 1)?,
        left_vs_right: left.max_entry_diff(&right, 1)?,
    })
}
