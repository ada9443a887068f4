//! Settings groups attached to models.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::distributions::pmf::Pmf;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::Params;
use crate::transforms::TransformRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MleMethod {
    NelderMead,
    Annealing,
    CoordinateCycle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleSettings {
    pub method: MleMethod,
    /// Simplex diameter (Nelder-Mead), final step size (annealing) or
    /// per-cycle improvement (coordinate cycling) at which to stop.
    pub tolerance: f64,
    pub max_iter: usize,
    pub restarts: usize,
    /// Initial simplex edge / annealing step, relative to `max(1, |x|)`.
    pub step: f64,
    /// Seed for the stochastic methods.
    pub seed: u64,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self {
            method: MleMethod::NelderMead,
            tolerance: 1e-7,
            max_iter: 10_000,
            restarts: 1,
            step: 0.5,
            seed: 0,
        }
    }
}

impl MleSettings {
    pub fn annealing() -> Self {
        Self {
            method: MleMethod::Annealing,
            tolerance: 1e-4,
            max_iter: 5_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iter == 0 || self.restarts == 0 || !(self.step > 0.0)
        {
            return Err(Error::invalid("MLE settings must be strictly positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct McmcSettings {
    pub burnin: usize,
    /// Symmetric zero-centred proposal model; `None` is an isotropic
    /// Normal scaled by `step_scale`.
    pub proposal: Option<Model>,
    pub step_scale: f64,
    pub thin: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            burnin: 2000,
            proposal: None,
            step_scale: 1.0,
            thin: 1,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_scale > 0.0) || self.thin == 0 {
            return Err(Error::invalid("MCMC settings must be strictly positive"));
        }
        Ok(())
    }
}

/// Kernel smoothing of a PMF. The kernel must have a location block named
/// `mu`; `bandwidth` supplies its remaining blocks. `None` selects a
/// diagonal Silverman bandwidth computed from the support.
#[derive(Clone, Debug)]
pub struct KdeSettings {
    pub kernel: Model,
    pub bandwidth: Option<Params>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncMcSettings {
    pub normalizer_draws: usize,
}

impl Default for TruncMcSettings {
    fn default() -> Self {
        Self {
            normalizer_draws: 10_000,
        }
    }
}

/// Controls the stochastic fill-in defaults (memoized PMF, empirical CDF,
/// Monte Carlo normalizers): how many draws and from which fixed seed.
#[derive(Clone, Debug, PartialEq)]
pub struct FillSettings {
    pub draws: usize,
    pub seed: u64,
}

impl Default for FillSettings {
    fn default() -> Self {
        Self {
            draws: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SettingsGroup {
    Mle(MleSettings),
    Mcmc(McmcSettings),
    Kde(KdeSettings),
    TruncMc(TruncMcSettings),
    Fill(FillSettings),
    Transform(Arc<TransformRecord>),
    Pmf(Arc<Pmf>),
}

impl SettingsGroup {
    pub fn key(&self) -> &'static str {
        match self {
            SettingsGroup::Mle(_) => "mle",
            SettingsGroup::Mcmc(_) => "mcmc",
            SettingsGroup::Kde(_) => "kde",
            SettingsGroup::TruncMc(_) => "trunc_mc",
            SettingsGroup::Fill(_) => "fill",
            SettingsGroup::Transform(_) => "transform",
            SettingsGroup::Pmf(_) => "pmf",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SettingsGroup::Mle(s) => s.validate(),
            SettingsGroup::Mcmc(s) => s.validate(),
            SettingsGroup::TruncMc(s) if s.normalizer_draws == 0 => {
                Err(Error::invalid("normalizer_draws must be positive"))
            }
            SettingsGroup::Fill(s) if s.draws == 0 => Err(Error::invalid("fill draws must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Settings {
    groups: BTreeMap<&'static str, SettingsGroup>,
}

impl Settings {
    pub fn insert(&mut self, group: SettingsGroup) {
        self.groups.insert(group.key(), group);
    }

    pub fn get(&self, key: &str) -> Option<&SettingsGroup> {
        self.groups.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.groups.keys().copied()
    }

    pub fn mle(&self) -> MleSettings {
        match self.groups.get("mle") {
            Some(SettingsGroup::Mle(s)) => s.clone(),
            _ => MleSettings::default(),
        }
    }

    pub fn mcmc(&self) -> McmcSettings {
        match self.groups.get("mcmc") {
            Some(SettingsGroup::Mcmc(s)) => s.clone(),
            _ => McmcSettings::default(),
        }
    }

    pub fn kde(&self) -> Option<&KdeSettings> {
        match self.groups.get("kde") {
            Some(SettingsGroup::Kde(s)) => Some(s),
            _ => None,
        }
    }

    pub fn trunc_mc(&self) -> TruncMcSettings {
        match self.groups.get("trunc_mc") {
            Some(SettingsGroup::TruncMc(s)) => s.clone(),
            _ => TruncMcSettings::default(),
        }
    }

    pub fn fill(&self) -> FillSettings {
        match self.groups.get("fill") {
            Some(SettingsGroup::Fill(s)) => s.clone(),
            _ => FillSettings::default(),
        }
    }

    pub fn transform(&self) -> Option<&Arc<TransformRecord>> {
        match self.groups.get("transform") {
            Some(SettingsGroup::Transform(t)) => Some(t),
            _ => None,
        }
    }

    pub fn pmf(&self) -> Option<&Arc<Pmf>> {
        match self.groups.get("pmf") {
            Some(SettingsGroup::Pmf(p)) => Some(p),
            _ => None,
        }
    }
}
