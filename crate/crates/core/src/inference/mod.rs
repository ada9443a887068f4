//! Prediction, parameter covariance and PMF comparison.

mod covariance;
mod metrics;
mod predict;

pub use covariance::{
    bootstrap_cov, fisher_info_cov, jackknife_cov, replication_cov, CovMethod, CovarianceEstimate,
};
pub use metrics::{bin_to_pmf, entropy, kl_divergence, ks_stat, rmse};
pub use predict::{predict, Prediction};
