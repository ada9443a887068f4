use crate::data::DataDim;
use crate::distributions::mvn_model;
use crate::error::{Error, Result};
use crate::model::{DataKind, Model};
use crate::params::Params;
use crate::settings::{FillSettings, KdeSettings, MleMethod, MleSettings, SettingsGroup};
use crate::stream::RandomStream;

/// Draws used for the smoothed likelihood of one parameter point.
pub const DEMAND_LIKELIHOOD_DRAWS: usize = 500;
const ALPHA_RANGE: (f64, f64) = (0.01, 0.99);
const ALPHA_TRIES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemandConfig {
    pub n_agents: usize,
    /// Price of the first good; the second costs one.
    pub price: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        Self {
            n_agents: 1000,
            price: 0.5,
        }
    }
}

/// One agent's purchase of the two goods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Choice {
    pub q1: f64,
    pub q2: f64,
}

/// `q1 = (p / alpha)^(1 / (1 - alpha))`, capped at what the budget buys,
/// and the rest of the budget on the second good.
pub fn agent_choice(alpha: f64, price: f64, budget: f64) -> Choice {
    let budget = budget.max(0.0);
    let interior = (price / alpha).powf(1.0 / (1.0 - alpha));
    let q1 = interior.min(budget / price).max(0.0);
    let q2 = (budget - price * q1).max(0.0);
    Choice { q1, q2 }
}

/// Counts of the corrections made during one population draw.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DemandRunLog {
    pub alpha_resamples: usize,
    pub alpha_clamped: usize,
    pub budget_capped: usize,
}

fn draw_alpha(mu: f64, s: &mut RandomStream, log: &mut DemandRunLog) -> f64 {
    for _ in 0..ALPHA_TRIES {
        let a = mu + s.standard_normal();
        if a > ALPHA_RANGE.0 && a < ALPHA_RANGE.1 {
            return a;
        }
        log.alpha_resamples += 1;
    }
    log.alpha_clamped += 1;
    mu.clamp(ALPHA_RANGE.0, ALPHA_RANGE.1)
}

/// Mean consumption `(Q1, Q2)` of one population drawn at
/// `(mu_b, mu_alpha)`.
pub fn demand_run(cfg: &DemandConfig, mu_b: f64, mu_alpha: f64, s: &mut RandomStream) -> ([f64; 2], DemandRunLog) {
    let mut log = DemandRunLog::default();
    let agents: Vec<(f64, f64)> = (0..cfg.n_agents)
        .map(|_| {
            let b = mu_b + s.standard_normal();
            (b, draw_alpha(mu_alpha, s, &mut log))
        })
        .collect();
    let (mut q1, mut q2) = (0.0, 0.0);
    for (b, alpha) in agents {
        let c = agent_choice(alpha, cfg.price, b);
        if c.q1 < (cfg.price / alpha).powf(1.0 / (1.0 - alpha)) {
            log.budget_capped += 1;
        }
        q1 += c.q1;
        q2 += c.q2;
    }
    let n = cfg.n_agents as f64;
    ([q1 / n, q2 / n], log)
}

/// Mean demand `(Q1, Q2)` of a population with budgets
/// `b ~ N(mu_b, 1)` and preferences `alpha ~ N(mu_alpha, 1)` kept inside
/// (0.01, 0.99). The likelihood is a Normal-kernel density over 500 draws;
/// estimation cycles through the two parameters.
pub fn demand_model(cfg: DemandConfig) -> Result<Model> {
    if cfg.n_agents == 0 {
        return Err(Error::invalid("the demand model needs at least one agent"));
    }
    if !(cfg.price > 0.0) {
        return Err(Error::invalid("price must be positive"));
    }
    let shape = Params::new("mu_b", vec![3.0]).with_block("mu_alpha", vec![0.5]);
    let price = cfg.price;
    Ok(Model::builder("demand_sim", DataDim::Fixed(2), shape)
        .data_kind(DataKind::Continuous)
        .sampler(move |p, s| {
            let (q, log) = demand_run(&cfg, p.values()[0], p.values()[1], s);
            if log.alpha_clamped > 0 {
                log::debug!("demand run clamped {} preference draws", log.alpha_clamped);
            }
            Ok(q.to_vec())
        })
        .start(move |d| {
            let spend = d.rows().iter().map(|r| price * r[0] + r[1]).sum::<f64>() / d.len().max(1) as f64;
            Params::new("mu_b", vec![spend]).with_block("mu_alpha", vec![0.5])
        })
        .setting(SettingsGroup::Kde(KdeSettings {
            kernel: mvn_model(2),
            bandwidth: None,
        }))
        .setting(SettingsGroup::Fill(FillSettings {
            draws: DEMAND_LIKELIHOOD_DRAWS,
            ..FillSettings::default()
        }))
        .setting(SettingsGroup::Mle(MleSettings {
            method: MleMethod::CoordinateCycle,
            tolerance: 1e-4,
            max_iter: 20,
            ..MleSettings::default()
        }))
        .build())
}
