use crate::data::DataDim;
use crate::error::{Error, Result};
use crate::model::{lower_bound_constraint, DataKind, Model};
use crate::params::Params;
use crate::stream::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkSimConfig {
    pub n_agents: usize,
    /// Spread of the agents' positions; the starting value when free.
    pub sigma: f64,
}

impl Default for NetworkSimConfig {
    fn default() -> Self {
        Self {
            n_agents: 10,
            sigma: 1.0,
        }
    }
}

impl NetworkSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::invalid("the network needs at least two agents"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(())
    }
}

/// Link counts per agent, in agent order. Positions are `sigma * z`;
/// agents `i < j` link when a uniform draw is at most
/// `1 / (1 + |p_i - p_j|)`.
pub fn network_degrees(n: usize, sigma: f64, s: &mut RandomStream) -> Vec<usize> {
    let pos: Vec<f64> = (0..n).map(|_| sigma * s.standard_normal()).collect();
    let mut deg = vec![0; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = s.uniform();
            if r <= 1.0 / (1.0 + (pos[i] - pos[j]).abs()) {
                deg[i] += 1;
                deg[j] += 1;
            }
        }
    }
    deg
}

/// The network simulation as a model of sorted (largest first) link
/// counts. With `sigma_free` the spread is the single parameter `sigma`;
/// otherwise the parameter space is empty and `cfg.sigma` is used.
pub fn network_sim_model(cfg: NetworkSimConfig, sigma_free: bool) -> Result<Model> {
    cfg.validate()?;
    let n = cfg.n_agents;
    let shape = if sigma_free {
        Params::new("sigma", vec![cfg.sigma])
    } else {
        Params::empty()
    };
    let fixed_sigma = cfg.sigma;
    let mut b = Model::builder("network_sim", DataDim::Fixed(n), shape)
        .data_kind(DataKind::Discrete)
        .sampler(move |p, s| {
            let sigma = if sigma_free { p.values()[0] } else { fixed_sigma };
            if !sigma.is_finite() {
                return Err(Error::NonFinite {
                    point: p.values().to_vec(),
                });
            }
            let mut deg = network_degrees(n, sigma.abs(), s);
            deg.sort_unstable_by(|a, b| b.cmp(a));
            Ok(deg.into_iter().map(|d| d as f64).collect())
        });
    if sigma_free {
        b = b.constraint(lower_bound_constraint(&["sigma"], 1e-6));
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_agents() {
        let m = network_sim_model(
            NetworkSimConfig {
                n_agents: 2,
                sigma: 1.0,
            },
            false,
        )
        .unwrap();
        let mut s = RandomStream::new(5);
        let d = m.draw_many(&Params::empty(), 100_000, &mut s).unwrap();
        let mut linked = 0;
        for r in d.rows() {
            assert!(*r == [1.0, 1.0] || *r == [0.0, 0.0]);
            linked += (r[0] == 1.0) as usize;
        }
        // E[1/(1+|Z1-Z2|)] by quadrature over |Z1-Z2| ~ half-normal(√2).
        let h = 1e-4;
        let mut want = 0.0;
        let sd = 2f64.sqrt();
        for i in 0..200_000 {
            let x = (i as f64 + 0.5) * h;
            let dens = 2.0 * (-(x / sd).powi(2) / 2.0).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
            want += dens / (1.0 + x) * h;
        }
        let got = linked as f64 / 1e5;
        assert!((got - want).abs() < 0.01, "{got} vs {want}");
    }

    #[test]
    fn sorted_and_bounded() {
        let m = network_sim_model(NetworkSimConfig::default(), false).unwrap();
        let mut s = RandomStream::new(1);
        for _ in 0..200 {
            let r = m.draw(&Params::empty(), &mut s).unwrap();
            assert!(r.windows(2).all(|w| w[0] >= w[1]));
            assert!(r.iter().all(|&v| (0.0..=9.0).contains(&v)));
        }
    }

    #[test]
    fn degree_sum_is_even() {
        let mut s = RandomStream::new(3);
        for _ in 0..500 {
            let d = network_degrees(7, 0.8, &mut s);
            assert_eq!(d.iter().sum::<usize>() % 2, 0);
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let m = network_sim_model(NetworkSimConfig::default(), true).unwrap();
        let p = Params::new("sigma", vec![0.7]);
        let a = m.draw(&p, &mut RandomStream::new(11)).unwrap();
        let b = m.draw(&p, &mut RandomStream::new(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_config() {
        let cfg = NetworkSimConfig {
            n_agents: 1,
            sigma: 1.0,
        };
        assert!(network_sim_model(cfg, false).is_err());
    }
}
