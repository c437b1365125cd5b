//! Black-Scholes, Merton-Garman and gauge Hamiltonians as discrete operators on
//! a log-price / log-variance lattice, with backward PDE pricing, martingale
//! audits and Monte Carlo cross-checks.

pub mod cli;
pub mod error;
pub mod gauge_analysis;
pub mod grid;
pub mod montecarlo;
pub mod operators;
pub mod params;
pub mod payoff;
pub mod pricing;
pub mod sparse;

pub use error::{Error, Result};
pub use grid::{default_grid_2d, default_x_axis, make_grid_2d, sample, Grid, GridFunction, LogGrid1D, LogGrid2D};
pub use params::{ModelParams, SigmaMode};
