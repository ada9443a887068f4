//! Agent-based simulations wrapped as models.

mod demand;
mod network;
mod search;

use std::io::Write;

pub use demand::{agent_choice, demand_model, demand_run, Choice, DemandConfig, DemandRunLog, DEMAND_LIKELIHOOD_DRAWS};
pub use network::{network_degrees, network_sim_model, NetworkSimConfig};
pub use search::{
    fit_weibull, fuzz_weibull_posterior, pooled_times, search_model, search_run, SearchConfig,
    SettingPrior, FUZZ_RUNS, MAX_TICKS,
};

use crate::error::Result;
use crate::model::Model;
use crate::params::Params;
use crate::stream::RandomStream;

/// Writes `runs` raw draws of `m` at `p` as CSV, one run per row.
pub fn dump_runs<W: Write>(m: &Model, p: &Params, runs: usize, s: &mut RandomStream, w: W) -> Result<()> {
    m.draw_many(p, runs, s)?.write_csv(w)
}
