//! Scalar checks of the gauge-validity, momentum-ratio and martingale conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, Grid, LogGrid2D};
use crate::operators::{build_gauge_hamiltonian, build_mg_hamiltonian, gauge_coefficients, mg_coefficients, GaugeForm};
use crate::params::ModelParams;

/// Relative tolerance used to decide that `sigma^2 = 2r`.
const HERMITICITY_RTOL: f64 = 1e-12;

fn at_hermiticity_point(params: &ModelParams) -> bool {
    let (v, two_r) = (params.sigma * params.sigma, 2.0 * params.r);
    (v - two_r).abs() <= HERMITICITY_RTOL * v.max(two_r)
}

/// `px / py = +-sqrt(omega / (1 + omega))`, returned as `(+root, -root)`.
pub fn momentum_ratio(omega: f64) -> Result<(f64, f64)> {
    if omega == -1.0 || !omega.is_finite() {
        return Err(Error::InvalidParams { field: "omega", reason: format!("omega = {omega} has no momentum ratio") });
    }
    let radicand = omega / (1.0 + omega);
    if radicand < 0.0 {
        return Err(Error::InvalidParams {
            field: "omega",
            reason: format!("omega/(1+omega) < 0 for omega in (-1, 0); got {omega}"),
        });
    }
    let root = radicand.sqrt();
    Ok((root, -root))
}

/// `(1 + px/py) - 4 sigma^2/(sigma^2 - 2r) * theta_xy/theta_x`.
pub fn information_preservation_check(px_over_py: f64, theta_x: f64, theta_xy: f64, params: &ModelParams) -> Result<f64> {
    if theta_x == 0.0 {
        return Err(Error::Domain("information-preservation check needs theta_x != 0".into()));
    }
    let lhs = 1.0 + px_over_py;
    if at_hermiticity_point(params) {
        if theta_xy != 0.0 {
            return Err(Error::Domain("information-preserving point requires θ_xy = 0".into()));
        }
        return Ok(lhs);
    }
    let v = params.sigma * params.sigma;
    Ok(lhs - 4.0 * v / (v - 2.0 * params.r) * theta_xy / theta_x)
}

/// `a + b/2 - (1/2 - r/sigma^2)` for momentum eigenvalues `a` (in x) and `b` (in y).
pub fn surprise_condition(a: f64, b: f64, params: &ModelParams) -> Result<f64> {
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParams { field: "sigma", reason: "surprise condition needs sigma > 0".into() });
    }
    Ok(a + b / 2.0 - (0.5 - params.r / (params.sigma * params.sigma)))
}

/// `lambda + e^y (mu + (k - 1/2) zeta^2 e^{2y(alpha-1)} + rho zeta e^{y(alpha-1/2)})`, where
/// `k` is the vol-of-vol factor; with `k = 1` this is the printed corona condition.
/// `H_MG e^{x+y} = -corona_lhs * e^{-y} * e^{x+y}` in the continuum.
pub fn corona_lhs(params: &ModelParams, y: f64) -> f64 {
    let z2 = params.zeta * params.zeta;
    let ev = y.exp();
    params.lambda
        + ev * (params.mu
            + (params.vol_vol_factor() - 0.5) * z2 * (2.0 * y * (params.alpha - 1.0)).exp()
            + params.rho * params.zeta * (y * (params.alpha - 0.5)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub residual_norm: f64,
    pub condition_lhs: f64,
    pub satisfied: bool,
}

/// One interior y row of the MG martingale check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub y: f64,
    /// Max over interior x of `|H_MG e^{x+y}| / e^{x+y}`.
    pub residual: f64,
    /// `|corona_lhs(y)| * e^{-y}`.
    pub analytic: f64,
}

pub fn mg_martingale_rows(params: &ModelParams, grid: &LogGrid2D) -> Result<Vec<MartingaleRow>> {
    let g = Grid::from(*grid);
    let h = build_mg_hamiltonian(params, g)?;
    let f = sample(g, |x, y| (x + y).exp())?;
    let out = h.apply(&f)?;
    let (nx, ny) = (g.nx(), g.ny());
    Ok((1..ny - 1)
        .map(|j| {
            let y = grid.y_axis().point(j);
            let residual = (1..nx - 1)
                .map(|i| (out.at(i, j) / f.at(i, j)).abs())
                .fold(0.0, f64::max);
            MartingaleRow { y, residual, analytic: corona_lhs(params, y).abs() * (-y).exp() }
        })
        .collect())
}

pub fn mg_martingale_report(params: &ModelParams, grid: &LogGrid2D, tolerance: f64) -> Result<MartingaleReport> {
    let rows = mg_martingale_rows(params, grid)?;
    if rows.is_empty() {
        return Err(Error::Domain("grid has no interior rows".into()));
    }
    let residual_norm = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let condition_lhs = rows.iter().map(|r| corona_lhs(params, r.y).abs()).fold(0.0, f64::max);
    Ok(MartingaleReport { residual_norm, condition_lhs, satisfied: residual_norm <= tolerance })
}

/// Positive roots of `a u^2 + mu u + lambda = 0` in `u = e^y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub a: f64,
    pub mu: f64,
    pub lambda: f64,
    pub roots_y: Vec<f64>,
    pub roots_expy: Vec<f64>,
    pub no_equilibrium: bool,
}

pub fn martingale_roots(a_coeff: f64, mu: f64, lambda: f64) -> Result<RootSet> {
    if a_coeff == 0.0 || !a_coeff.is_finite() {
        return Err(Error::InvalidParams { field: "a", reason: format!("leading coefficient must be non-zero, got {a_coeff}") });
    }
    if !mu.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidParams { field: "mu", reason: "mu and lambda must be finite".into() });
    }
    let mut disc = mu * mu - 4.0 * a_coeff * lambda;
    // Cancellation in a double root can leave a tiny negative discriminant.
    if disc < 0.0 && disc.abs() <= 1e-14 * (mu * mu).max((4.0 * a_coeff * lambda).abs()) {
        disc = 0.0;
    }
    let mut u: Vec<f64> = if disc < 0.0 {
        Vec::new()
    } else if disc == 0.0 {
        vec![-mu / (2.0 * a_coeff)]
    } else {
        let q = -0.5 * (mu + mu.signum() * disc.sqrt());
        let mut v = vec![q / a_coeff];
        if q != 0.0 {
            v.push(lambda / q);
        }
        v
    };
    u.retain(|&v| v > 0.0 && v.is_finite());
    u.sort_by(f64::total_cmp);
    u.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()));
    let roots_y: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    Ok(RootSet {
        a: a_coeff,
        mu,
        lambda,
        no_equilibrium: u.is_empty(),
        roots_y,
        roots_expy: u,
    })
}

/// The two sums `c = a + b` for which `H_gauge e^{ax+by} = 0`: `1` and `-2r/sigma^2`.
pub fn gauge_martingale_sums(params: &ModelParams) -> Result<(f64, f64)> {
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParams { field: "sigma", reason: "gauge martingale family needs sigma > 0".into() });
    }
    Ok((1.0, -2.0 * params.r / (params.sigma * params.sigma)))
}

/// `|-(v/2) c^2 + (v/2 - r) c + r|` for variance `v`.
pub fn gauge_martingale_quadratic(v: f64, r: f64, c: f64) -> f64 {
    (-0.5 * v * c * c + (0.5 * v - r) * c + r).abs()
}

/// Max interior `|H_gauge e^{ax+by}| / e^{ax+by}` using the expanded form.
pub fn gauge_martingale_residual(params: &ModelParams, a: f64, b: f64, grid: &LogGrid2D) -> Result<f64> {
    let g = Grid::from(*grid);
    let h = build_gauge_hamiltonian(params, g, GaugeForm::Expanded)?;
    let f = sample(g, |x, y| (a * x + b * y).exp())?;
    let out = h.apply(&f)?;
    Ok(g.interior_indices(1)
        .into_iter()
        .map(|k| (out.values()[k] / f.values()[k]).abs())
        .fold(0.0, f64::max))
}

/// Max pointwise coefficient deviations `|MG - gauge|` per block after the
/// family substitution `zeta^2 = e^{-2y(alpha-3/2)}`, `rho zeta = e^{-y(alpha-3/2)}`,
/// `r = lambda e^{-y} + mu` and `sigma^2 = e^y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolcoeffReport {
    pub d2x: f64,
    pub d1x: f64,
    pub d1y: f64,
    pub dxy: f64,
    pub d2y: f64,
    /// Max over rows of `| |dev_d2y| - e^y/2 | / e^y`.
    pub d2y_vs_half_variance: f64,
    /// Max over rows of the relative deviation of the other four blocks.
    pub exact_blocks_rel: f64,
}

pub fn volcoeff_audit(params: &ModelParams, grid: &LogGrid2D) -> Result<VolcoeffReport> {
    params.validate()?;
    let mut rep = VolcoeffReport { d2x: 0.0, d1x: 0.0, d1y: 0.0, dxy: 0.0, d2y: 0.0, d2y_vs_half_variance: 0.0, exact_blocks_rel: 0.0 };
    let alpha = params.alpha;
    for y in grid.y_axis().points() {
        let v = y.exp();
        let r = params.lambda * (-y).exp() + params.mu;
        let zeta_sq = (-2.0 * y * (alpha - 1.5)).exp();
        let rho_zeta = (-y * (alpha - 1.5)).exp();
        let mg = mg_coefficients(y, r, params.lambda, params.mu, zeta_sq, rho_zeta, alpha, params.vol_vol_factor());
        let gauge = gauge_coefficients(v, r);
        let dev = [
            (mg.d2x - gauge.d2x).abs(),
            (mg.d1x - gauge.d1x).abs(),
            (mg.d1y - gauge.d1y).abs(),
            (mg.dxy - gauge.dxy).abs(),
            (mg.d2y - gauge.d2y).abs(),
        ];
        rep.d2x = rep.d2x.max(dev[0]);
        rep.d1x = rep.d1x.max(dev[1]);
        rep.d1y = rep.d1y.max(dev[2]);
        rep.dxy = rep.dxy.max(dev[3]);
        rep.d2y = rep.d2y.max(dev[4]);
        rep.exact_blocks_rel = dev[..4].iter().fold(rep.exact_blocks_rel, |m, d| m.max(d / v));
        rep.d2y_vs_half_variance = rep.d2y_vs_half_variance.max((dev[4] - 0.5 * v).abs() / v);
    }
    Ok(rep)
}
