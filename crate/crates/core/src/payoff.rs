//! Holder and writer profit of European calls and puts held to expiry.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::{OptionContract, OptionKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Holder,
    Writer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitQuery {
    pub contract: OptionContract,
    pub side: Side,
    pub terminal_price: f64,
}

/// Per-share profit at expiry. The holder exercises only when it pays; the writer takes the other side.
pub fn profit(query: &ProfitQuery) -> Result<f64> {
    query.contract.validate()?;
    let s = query.terminal_price;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParams { field: "terminal_price", reason: format!("must be >= 0, got {s}") });
    }
    let holder = query.contract.payoff(s) - query.contract.premium;
    Ok(match query.side {
        Side::Holder => holder,
        Side::Writer => -holder,
    })
}

/// Terminal price at which the holder's profit is zero.
pub fn break_even(contract: &OptionContract) -> Result<f64> {
    contract.validate()?;
    match contract.kind {
        OptionKind::Call => Ok(contract.strike + contract.premium),
        OptionKind::Put if contract.premium > contract.strike => Err(Error::InvalidContract {
            field: "premium",
            reason: format!("put premium {} exceeds strike {}: no break-even", contract.premium, contract.strike),
        }),
        OptionKind::Put => Ok(contract.strike - contract.premium),
    }
}

/// CSV `S_T,holder_profit,writer_profit` on `n` evenly spaced prices in `[s_min, s_max]`.
pub fn payoff_table(contract: &OptionContract, s_min: f64, s_max: f64, n: usize) -> Result<String> {
    if !(s_min >= 0.0 && s_max > s_min) || n < 2 {
        return Err(Error::InvalidParams { field: "s_range", reason: format!("need 0 <= s_min < s_max and n >= 2, got [{s_min}, {s_max}], n = {n}") });
    }
    let mut out = String::from("S_T,holder_profit,writer_profit\n");
    for i in 0..n {
        let s = s_min + (s_max - s_min) * i as f64 / (n - 1) as f64;
        let q = |side| ProfitQuery { contract: *contract, side, terminal_price: s };
        let _ = writeln!(out, "{s},{},{}", profit(&q(Side::Holder))?, profit(&q(Side::Writer))?);
    }
    Ok(out)
}
