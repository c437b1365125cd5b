use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, Grid, GridFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn intrinsic(self, s: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (s - strike).max(0.0),
            OptionKind::Put => (strike - s).max(0.0),
        }
    }
}

/// A European call or put.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionContract {
    pub kind: OptionKind,
    pub strike: f64,
    /// Price paid per share by the holder; only enters profit calculations.
    pub premium: f64,
    pub maturity: f64,
}

impl OptionContract {
    pub fn new(kind: OptionKind, strike: f64, premium: f64, maturity: f64) -> Result<Self> {
        let c = Self { kind, strike, premium, maturity };
        c.validate()?;
        Ok(c)
    }

    pub fn call(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(OptionKind::Call, strike, 0.0, maturity)
    }

    pub fn put(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(OptionKind::Put, strike, 0.0, maturity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::InvalidContract { field: "strike", reason: format!("must be > 0, got {}", self.strike) });
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidContract { field: "maturity", reason: format!("must be > 0, got {}", self.maturity) });
        }
        if !(self.premium >= 0.0 && self.premium.is_finite()) {
            return Err(Error::InvalidContract { field: "premium", reason: format!("must be >= 0, got {}", self.premium) });
        }
        Ok(())
    }

    pub fn payoff(&self, s: f64) -> f64 {
        self.kind.intrinsic(s, self.strike)
    }
}

/// Payoff at maturity sampled on the grid (`x = ln S`); constant across `y`.
pub fn terminal_payoff(contract: &OptionContract, grid: impl Into<Grid>) -> Result<GridFunction> {
    sample(grid, |x, _| contract.payoff(x.exp()))
}
