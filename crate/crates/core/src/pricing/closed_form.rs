use crate::error::{Error, Result};
use crate::params::ModelParams;

use super::{OptionContract, OptionKind};

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn d1_d2(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let sd = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / sd;
    (d1, d1 - sd)
}

/// European price with `tau` to expiry. `sigma = 0` or `tau = 0` use the deterministic limit.
pub fn bs_price(kind: OptionKind, s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    let df = (-r * tau).exp();
    if sigma == 0.0 || tau == 0.0 {
        return kind.intrinsic(s, k * df);
    }
    let (d1, d2) = d1_d2(s, k, r, sigma, tau);
    match kind {
        OptionKind::Call => s * norm_cdf(d1) - k * df * norm_cdf(d2),
        OptionKind::Put => k * df * norm_cdf(-d2) - s * norm_cdf(-d1),
    }
}

/// `dC/dS` with `tau` to expiry.
pub fn bs_delta(kind: OptionKind, s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    let call = if sigma == 0.0 || tau == 0.0 {
        let fwd = s - k * (-r * tau).exp();
        if fwd > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        norm_cdf(d1_d2(s, k, r, sigma, tau).0)
    };
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - 1.0,
    }
}

/// Closed-form BS price at time zero using `params.r` and `params.sigma`.
pub fn bs_closed_form(params: &ModelParams, contract: &OptionContract, s0: f64) -> Result<f64> {
    params.validate()?;
    contract.validate()?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidParams { field: "s0", reason: format!("must be > 0, got {s0}") });
    }
    Ok(bs_price(contract.kind, s0, contract.strike, params.r, params.sigma, contract.maturity))
}
