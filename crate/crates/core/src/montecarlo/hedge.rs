use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::params::ModelParams;
use crate::pricing::{bs_delta, bs_price, OptionContract};

use super::paths::{log_step, mean_and_se, price_rng};

/// Terminal replication error of a discretely rebalanced short-option delta hedge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeStats {
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
}

/// Sells the option at its BS value, holds the analytic delta in stock and the
/// rest in cash at rate `r`, rebalancing `n_steps` times; paths follow the
/// price SDE with drift `phi`. Reports `portfolio(T) - payoff(S_T)`.
pub fn delta_hedge_test(
    params: &ModelParams,
    contract: &OptionContract,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<HedgeStats> {
    params.validate()?;
    contract.validate()?;
    if n_steps == 0 || n_paths < 2 {
        return Err(Error::InvalidParams { field: "n_steps", reason: "need n_steps >= 1 and n_paths >= 2".into() });
    }
    let (r, sigma, phi) = (params.r, params.sigma, params.phi);
    let (kind, k, t) = (contract.kind, contract.strike, contract.maturity);
    let dt = t / n_steps as f64;
    let growth = (r * dt).exp();
    let var = sigma * sigma;
    let errors: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = price_rng(seed, p);
            let mut s = s0;
            let mut delta = bs_delta(kind, s, k, r, sigma, t);
            let mut cash = bs_price(kind, s, k, r, sigma, t) - delta * s;
            for step in 1..=n_steps {
                s = log_step(s, phi, var, sigma, dt, rng.sample(StandardNormal));
                cash *= growth;
                if step < n_steps {
                    let tau = t - step as f64 * dt;
                    let next = bs_delta(kind, s, k, r, sigma, tau);
                    cash -= (next - delta) * s;
                    delta = next;
                }
            }
            delta * s + cash - contract.payoff(s)
        })
        .collect();
    let (mean, std_error) = mean_and_se(&errors);
    let std = std_error * (n_paths as f64).sqrt();
    Ok(HedgeStats { mean, std, std_error, n_paths, n_steps })
}

/// Two-option hedge of a stochastic-volatility position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeCoefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    /// `sigma S dC/dS` of each option.
    pub xi: [f64; 2],
    /// `zeta V^alpha dC/dV` of each option.
    pub psi: [f64; 2],
    /// Residual exposures of `C1 + Gamma1 C2 + Gamma2 S`.
    pub portfolio_xi: f64,
    pub portfolio_psi: f64,
}

/// Central differences in x and y (one-sided at the edges).
pub(crate) fn gradients(f: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    let g = *f.grid();
    let Some(ya) = g.y_axis().copied() else {
        return Err(Error::Domain("volatility hedge needs a two-dimensional surface".into()));
    };
    let (nx, ny) = (g.nx(), g.ny());
    let (hx, hy) = (g.x_axis().spacing(), ya.spacing());
    let d = |a: f64, b: f64, c: f64, idx: usize, n: usize, h: f64| -> f64 {
        // a, b, c are the values at idx-1, idx, idx+1 (clamped at the ends).
        if idx == 0 {
            (c - b) / h
        } else if idx == n - 1 {
            (b - a) / h
        } else {
            (c - a) / (2.0 * h)
        }
    };
    let mut fx = vec![0.0; g.len()];
    let mut fy = vec![0.0; g.len()];
    for i in 0..nx {
        for j in 0..ny {
            let k = g.index(i, j);
            let at = |ii: usize, jj: usize| f.at(ii, jj);
            fx[k] = d(at(i.saturating_sub(1), j), at(i, j), at((i + 1).min(nx - 1), j), i, nx, hx);
            fy[k] = d(at(i, j.saturating_sub(1)), at(i, j), at(i, (j + 1).min(ny - 1)), j, ny, hy);
        }
    }
    Ok((GridFunction::new(g, fx)?, GridFunction::new(g, fy)?))
}

/// Solves `psi1 + G1 psi2 = 0` and `xi1 + G1 xi2 + G2 sigma S = 0` at `(s, v)`,
/// with `sigma = sqrt(V)`, `xi = sqrt(V) C_x` and `psi = zeta V^alpha e^{-y} C_y`.
pub fn hedge_coefficients(c1: &GridFunction, c2: &GridFunction, s: f64, v: f64, params: &ModelParams) -> Result<HedgeCoefficients> {
    if c1.grid() != c2.grid() {
        return Err(Error::GridMismatch);
    }
    if !(s > 0.0 && v > 0.0) {
        return Err(Error::InvalidParams { field: "s0", reason: format!("hedge point needs S, V > 0, got {s}, {v}") });
    }
    let (x, y) = (s.ln(), v.ln());
    let (c1x, c1y) = gradients(c1)?;
    let (c2x, c2y) = gradients(c2)?;
    let vol = v.sqrt();
    let vega_scale = params.zeta * v.powf(params.alpha) / v;
    let xi = [vol * c1x.interpolate(x, y)?, vol * c2x.interpolate(x, y)?];
    let psi = [vega_scale * c1y.interpolate(x, y)?, vega_scale * c2y.interpolate(x, y)?];
    if psi[1] == 0.0 || !psi[1].is_finite() {
        return Err(Error::HedgeUndefined);
    }
    let gamma1 = -psi[0] / psi[1];
    let gamma2 = -(xi[0] + gamma1 * xi[1]) / (vol * s);
    Ok(HedgeCoefficients {
        gamma1,
        gamma2,
        xi,
        psi,
        portfolio_xi: xi[0] + gamma1 * xi[1] + gamma2 * vol * s,
        portfolio_psi: psi[0] + gamma1 * psi[1],
    })
}
