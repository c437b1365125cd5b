//! Scalar model parameters shared by every Hamiltonian, pricer and simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the volatility entering the BS and gauge Hamiltonians is read on a
/// two-dimensional grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    /// Use `sigma` everywhere.
    Constant,
    /// Identify sigma^2 with the variance coordinate, sigma^2 = e^y, row by row.
    #[default]
    Local,
}

/// Every scalar of the BS / MG / gauge models in one record.
///
/// Rates are per unit time, `sigma` per square root of time. `lambda` and `mu`
/// are the constant and linear variance-drift coefficients, `zeta` scales the
/// vol-of-vol and `alpha` is its exponent. `omega` is the exponent scale of
/// the gauge transformation `U = exp(omega * theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub r: f64,
    pub sigma: f64,
    pub phi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub zeta: f64,
    pub alpha: f64,
    pub rho: f64,
    pub omega: f64,
    /// Put `zeta^2 / 2` (instead of `zeta^2`) on the variance second derivative.
    pub vol_vol_half: bool,
    pub sigma_mode: SigmaMode,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            r: 0.05,
            sigma: 0.2,
            phi: 0.05,
            lambda: 0.0,
            mu: 0.0,
            zeta: 0.0,
            alpha: 1.0,
            rho: 0.0,
            omega: 1.0,
            vol_vol_half: false,
            sigma_mode: SigmaMode::Local,
        }
    }
}

impl ModelParams {
    /// Constant-volatility BS parameters with risk-neutral drift.
    pub fn black_scholes(r: f64, sigma: f64) -> Self {
        Self {
            r,
            sigma,
            phi: r,
            sigma_mode: SigmaMode::Constant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("r", self.r),
            ("sigma", self.sigma),
            ("phi", self.phi),
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("zeta", self.zeta),
            ("alpha", self.alpha),
            ("rho", self.rho),
            ("omega", self.omega),
        ];
        for (field, value) in all {
            if !value.is_finite() {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidParams {
                field: "sigma",
                reason: format!("must be >= 0, got {}", self.sigma),
            });
        }
        if self.r < 0.0 {
            return Err(Error::InvalidParams {
                field: "r",
                reason: format!("must be >= 0, got {}", self.r),
            });
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParams {
                field: "rho",
                reason: format!("must lie in [-1, 1], got {}", self.rho),
            });
        }
        if self.omega == -1.0 {
            return Err(Error::InvalidParams {
                field: "omega",
                reason: "omega = -1 makes omega/(1+omega) singular".into(),
            });
        }
        Ok(())
    }

    /// Variance used by the BS / gauge Hamiltonians at log-variance `y`.
    pub fn variance_at(&self, y: f64) -> f64 {
        match self.sigma_mode {
            SigmaMode::Constant => self.sigma * self.sigma,
            SigmaMode::Local => y.exp(),
        }
    }

    /// Coefficient multiplying the variance second derivative relative to `zeta^2`.
    pub fn vol_vol_factor(&self) -> f64 {
        if self.vol_vol_half {
            0.5
        } else {
            1.0
        }
    }
}
