//! Numerical engines behind the default element strategies.

mod coordinate;
mod diff;
mod invert;
mod memo;
mod metropolis;
mod optimize;

pub use coordinate::{coordinate_cycle, coordinate_cycle_from};
pub use diff::{numeric_gradient, numeric_hessian};
pub use invert::{invert_cdf, invert_cdf_draw};
pub use memo::{kde_smooth, memoize_rng_to_pmf, silverman_bandwidth};
pub(crate) use memo::log_sum_exp;
pub use metropolis::{metropolis, Chain};
pub use optimize::{nelder_mead, simulated_annealing, OptimResult};
