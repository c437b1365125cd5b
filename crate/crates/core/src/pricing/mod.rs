//! Backward evolution of `dC/dt = H C` from the terminal payoff, and the BS closed form.
//!
//! Time runs backward: with `tau = T - t` the pricing equation is
//! `dC/dtau = -H C`, started from the payoff at `tau = 0`.

mod closed_form;
mod contract;
mod evolve;

pub use closed_form::{bs_closed_form, bs_delta, bs_price};
pub use contract::{terminal_payoff, OptionContract, OptionKind};
pub use evolve::{evolve, evolve_with, Boundary, Diagnostics, EvolveOptions, PriceSurface, SOLVE_TOLERANCE};

use crate::error::{Error, Result};
use crate::grid::{LogGrid1D, LogGrid2D};
use crate::operators::{build_bs_hamiltonian, build_mg_hamiltonian};
use crate::params::ModelParams;

fn far_field(params: &ModelParams, contract: &OptionContract) -> EvolveOptions {
    EvolveOptions {
        boundary: Boundary::FarField { kind: contract.kind, strike: contract.strike, rate: params.r },
        ..EvolveOptions::default()
    }
}

/// Full BS price surface on a log-price line.
pub fn bs_surface(params: &ModelParams, contract: &OptionContract, grid: &LogGrid1D, n_steps: usize) -> Result<PriceSurface> {
    contract.validate()?;
    let h = build_bs_hamiltonian(params, *grid)?;
    let payoff = terminal_payoff(contract, *grid)?;
    evolve_with(&h, &payoff, contract.maturity, n_steps, &far_field(params, contract))
}

/// BS PDE price at `s0`.
pub fn price_bs(params: &ModelParams, contract: &OptionContract, s0: f64, grid: &LogGrid1D, n_steps: usize) -> Result<f64> {
    bs_surface(params, contract, grid, n_steps)?.interpolate(s0.ln(), 0.0)
}

/// Full MG price surface on a log-price by log-variance plane.
pub fn mg_surface(params: &ModelParams, contract: &OptionContract, grid: &LogGrid2D, n_steps: usize) -> Result<PriceSurface> {
    contract.validate()?;
    let h = build_mg_hamiltonian(params, *grid)?;
    let payoff = terminal_payoff(contract, *grid)?;
    evolve_with(&h, &payoff, contract.maturity, n_steps, &far_field(params, contract))
}

/// MG PDE price at `(ln s0, ln v0)` by bilinear interpolation.
pub fn price_mg(
    params: &ModelParams,
    contract: &OptionContract,
    s0: f64,
    v0: f64,
    grid: &LogGrid2D,
    n_steps: usize,
) -> Result<f64> {
    if !(s0 > 0.0 && v0 > 0.0) {
        return Err(Error::InvalidParams { field: "s0", reason: format!("s0 and v0 must be > 0, got {s0}, {v0}") });
    }
    let (x, y) = (s0.ln(), v0.ln());
    let inside = |a: &LogGrid1D, v: f64| v >= a.min() && v <= a.max();
    if !inside(grid.x_axis(), x) || !inside(grid.y_axis(), y) {
        return Err(Error::OutOfBox { x, y });
    }
    mg_surface(params, contract, grid, n_steps)?.interpolate(x, y)
}
