//! Path simulation of the price and variance SDEs, Monte Carlo pricing,
//! delta-hedge replication and the two-option volatility hedge.
//!
//! Every path draws from its own counter-based ChaCha stream, so results do
//! not depend on how paths are scheduled across threads.

mod beta;
mod hedge;
mod paths;

pub use beta::{beta_field, BetaField, BetaOptions};
pub use hedge::{delta_hedge_test, hedge_coefficients, HedgeCoefficients, HedgeStats};
pub use paths::{
    correlate, mc_price, mean_and_se, noise_correlation, pairwise_sum, simulate_gbm, simulate_gbm_with, simulate_mg,
    simulate_mg_with, PathEnsemble, Record, Scheme, V_FLOOR,
};
