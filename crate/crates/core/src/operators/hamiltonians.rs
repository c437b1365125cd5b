use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::sparse::CsrMatrix;

use super::stencil::{tensor_term, Derivative};
use super::{BoundaryPolicy, LinearOperator, Term};

/// Pointwise coefficients of a Hamiltonian
/// `d2x dxx + d1x dx + d1y dy + dxy dxdy + d2y dyy + constant`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermCoefficients {
    pub d2x: f64,
    pub d1x: f64,
    pub d1y: f64,
    pub dxy: f64,
    pub d2y: f64,
    pub constant: f64,
}

/// MG coefficients at log-variance `y`, with `zeta^2` and `rho * zeta` passed
/// as products so substituted values can be plugged in directly.
#[allow(clippy::too_many_arguments)]
pub fn mg_coefficients(
    y: f64,
    r: f64,
    lambda: f64,
    mu: f64,
    zeta_sq: f64,
    rho_zeta: f64,
    alpha: f64,
    vol_vol_factor: f64,
) -> TermCoefficients {
    let v = y.exp();
    let vol_vol = zeta_sq * (2.0 * y * (alpha - 1.0)).exp();
    TermCoefficients {
        d2x: -0.5 * v,
        d1x: -(r - 0.5 * v),
        d1y: -(lambda * (-y).exp() + mu - 0.5 * vol_vol),
        dxy: -rho_zeta * (y * (alpha - 0.5)).exp(),
        d2y: -vol_vol_factor * vol_vol,
        constant: r,
    }
}

/// Coefficients of the expanded gauge Hamiltonian for variance `v`.
pub fn gauge_coefficients(v: f64, r: f64) -> TermCoefficients {
    TermCoefficients {
        d2x: -0.5 * v,
        d1x: 0.5 * v - r,
        d1y: 0.5 * v - r,
        dxy: -v,
        d2y: -0.5 * v,
        constant: r,
    }
}

/// Which algebraic form of the gauge Hamiltonian to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeForm {
    /// `(v/2)(-p)(p) + (v/2 - r) p + r` with `p = px + py` composed as matrices.
    Factored,
    /// Term-by-term expansion with the compact second-difference stencils.
    Expanded,
}

fn term(label: &str, matrix: CsrMatrix) -> Term {
    Term { label: label.into(), matrix }
}

fn shift(grid: &Grid, r: f64) -> Term {
    term("const", CsrMatrix::identity(grid.len()).scale(r))
}

fn require_plane(grid: &Grid, what: &str) -> Result<()> {
    if grid.y_axis().is_none() {
        return Err(Error::Domain(format!("{what} needs a two-dimensional grid")));
    }
    Ok(())
}

fn bs_variance<'a>(params: &'a ModelParams, grid: &Grid) -> impl Fn(f64) -> f64 + 'a {
    let line = grid.y_axis().is_none();
    move |y| if line { params.sigma * params.sigma } else { params.variance_at(y) }
}

pub fn build_bs_hamiltonian(params: &ModelParams, grid: impl Into<Grid>) -> Result<LinearOperator> {
    build_bs_hamiltonian_with_policy(params, grid, BoundaryPolicy::default())
}

/// `-(v/2) dxx + (v/2 - r) dx + r`, acting on `x` only. On a line `v = sigma^2`;
/// on a plane `v` follows [`ModelParams::sigma_mode`].
pub fn build_bs_hamiltonian_with_policy(
    params: &ModelParams,
    grid: impl Into<Grid>,
    policy: BoundaryPolicy,
) -> Result<LinearOperator> {
    params.validate()?;
    let grid = grid.into();
    let var = bs_variance(params, &grid);
    let r = params.r;
    let terms = vec![
        term("d2x", tensor_term(&grid, Some(Derivative::Second), None, policy, |_, y| -0.5 * var(y))),
        term("d1x", tensor_term(&grid, Some(Derivative::First), None, policy, |_, y| 0.5 * var(y) - r)),
        shift(&grid, r),
    ];
    LinearOperator::from_terms(grid, "H_BS", policy, terms)
}

pub fn build_mg_hamiltonian(params: &ModelParams, grid: impl Into<Grid>) -> Result<LinearOperator> {
    build_mg_hamiltonian_with_policy(params, grid, BoundaryPolicy::default())
}

pub fn build_mg_hamiltonian_with_policy(
    params: &ModelParams,
    grid: impl Into<Grid>,
    policy: BoundaryPolicy,
) -> Result<LinearOperator> {
    params.validate()?;
    let grid = grid.into();
    require_plane(&grid, "the MG Hamiltonian")?;
    let c = |y: f64| {
        mg_coefficients(
            y,
            params.r,
            params.lambda,
            params.mu,
            params.zeta * params.zeta,
            params.rho * params.zeta,
            params.alpha,
            params.vol_vol_factor(),
        )
    };
    let (d1, d2) = (Some(Derivative::First), Some(Derivative::Second));
    let terms = vec![
        term("d2x", tensor_term(&grid, d2, None, policy, |_, y| c(y).d2x)),
        term("d1x", tensor_term(&grid, d1, None, policy, |_, y| c(y).d1x)),
        term("d1y", tensor_term(&grid, None, d1, policy, |_, y| c(y).d1y)),
        term("dxy", tensor_term(&grid, d1, d1, policy, |_, y| c(y).dxy)),
        term("d2y", tensor_term(&grid, None, d2, policy, |_, y| c(y).d2y)),
        shift(&grid, params.r),
    ];
    LinearOperator::from_terms(grid, "H_MG", policy, terms)
}

pub fn build_gauge_hamiltonian(params: &ModelParams, grid: impl Into<Grid>, form: GaugeForm) -> Result<LinearOperator> {
    build_gauge_hamiltonian_with_policy(params, grid, form, BoundaryPolicy::default())
}

pub fn build_gauge_hamiltonian_with_policy(
    params: &ModelParams,
    grid: impl Into<Grid>,
    form: GaugeForm,
    policy: BoundaryPolicy,
) -> Result<LinearOperator> {
    params.validate()?;
    let grid = grid.into();
    require_plane(&grid, "the gauge Hamiltonian")?;
    let r = params.r;
    let c = |y: f64| gauge_coefficients(params.variance_at(y), r);
    let (d1, d2) = (Some(Derivative::First), Some(Derivative::Second));
    let terms = match form {
        GaugeForm::Expanded => vec![
            term("d2x", tensor_term(&grid, d2, None, policy, |_, y| c(y).d2x)),
            term("d1x", tensor_term(&grid, d1, None, policy, |_, y| c(y).d1x)),
            term("d2y", tensor_term(&grid, None, d2, policy, |_, y| c(y).d2y)),
            term("dxy", tensor_term(&grid, d1, d1, policy, |_, y| c(y).dxy)),
            term("d1y", tensor_term(&grid, None, d1, policy, |_, y| c(y).d1y)),
            shift(&grid, r),
        ],
        GaugeForm::Factored => {
            let px = tensor_term(&grid, d1, None, policy, |_, _| 1.0);
            let py = tensor_term(&grid, None, d1, policy, |_, _| 1.0);
            let p = px.add(&py, 1.0);
            let p2 = p.matmul(&p);
            let rows: Vec<TermCoefficients> = (0..grid.len()).map(|k| c(grid.coords(k).1)).collect();
            let diffusion: Vec<f64> = rows.iter().map(|t| t.d2x).collect();
            let drift: Vec<f64> = rows.iter().map(|t| t.d1x).collect();
            vec![term("p2", p2.scale_rows(&diffusion)), term("p", p.scale_rows(&drift)), shift(&grid, r)]
        }
    };
    let label = match form {
        GaugeForm::Expanded => "H_gauge_expanded",
        GaugeForm::Factored => "H_gauge_factored",
    };
    LinearOperator::from_terms(grid, label, policy, terms)
}
