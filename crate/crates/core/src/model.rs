//! The model record and its element dispatch.
//!
//! A [`Model`] carries a data space, a parameter template and up to five
//! optional elements: log-likelihood, estimator, sampler, CDF and a
//! parameter constraint. Whatever is missing is filled in on demand from
//! what is present:
//!
//! | element | fill-in, in order of preference |
//! |---------|----------------------------------|
//! | log-likelihood | numeric delta of the CDF, else a PMF memoized from draws |
//! | estimator | maximum likelihood over the resolved log-likelihood |
//! | sampler | CDF inversion (one-dimensional data), else Metropolis over the data space |
//! | CDF | share of seeded draws in the lower orthant of the query point |
//!
//! [`Model::resolve`] reports which route backs each element.

use std::fmt;
use std::sync::{Arc, Mutex};

use crate::data::{orthant_le, DataDim, DataSet};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::settings::{MleMethod, Settings, SettingsGroup};
use crate::solvers;
use crate::stream::RandomStream;

pub type RowLogLikeFn = dyn Fn(&[f64], &Params) -> Result<f64> + Send + Sync;
pub type SetLogLikeFn = dyn Fn(&DataSet, &Params) -> Result<f64> + Send + Sync;
pub type EstimateFn = dyn Fn(&Model, &DataSet) -> Result<FittedModel> + Send + Sync;
pub type DrawFn = dyn Fn(&Params, &mut RandomStream) -> Result<Vec<f64>> + Send + Sync;
pub type CdfFn = dyn Fn(&[f64], &Params) -> Result<f64> + Send + Sync;
pub type ConstraintFn = dyn Fn(&Params) -> ConstraintCheck + Send + Sync;
pub type StartFn = dyn Fn(&DataSet) -> Params + Send + Sync;

/// Result of a constraint check: the distance by which `params` violates
/// the constraint (0 when feasible) and the nearest feasible point.
#[derive(Clone, Debug)]
pub struct ConstraintCheck {
    pub violation: f64,
    pub projected: Params,
}

impl ConstraintCheck {
    pub fn ok(p: &Params) -> Self {
        Self {
            violation: 0.0,
            projected: p.clone(),
        }
    }
}

/// Builds a constraint that every entry of the named blocks be at least
/// `floor` (strict positivity uses a tiny floor).
pub fn lower_bound_constraint(blocks: &'static [&'static str], floor: f64) -> Arc<ConstraintFn> {
    Arc::new(move |p: &Params| {
        let mut projected = p.clone();
        let mut violation = 0.0;
        for name in blocks {
            if let Some(vals) = p.block(name) {
                let fixed: Vec<f64> = vals
                    .iter()
                    .map(|&v| {
                        if v < floor || v.is_nan() {
                            violation += if v.is_nan() { 1.0 } else { floor - v };
                            floor
                        } else {
                            v
                        }
                    })
                    .collect();
                projected.set_block(name, &fixed).expect("same block");
            }
        }
        ConstraintCheck {
            violation,
            projected,
        }
    })
}

#[derive(Clone)]
pub enum LogLikelihood {
    /// Per-observation log-likelihood; data-set totals are weighted sums.
    Row(Arc<RowLogLikeFn>),
    /// Whole-data-set log-likelihood for models that do not factor by row.
    Set(Arc<SetLogLikeFn>),
}

/// Where an element present on a model came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    ClosedForm,
    /// Synthesized by the named transformation from its base model(s).
    Delegated(&'static str),
}

#[derive(Clone)]
struct Slot<F> {
    f: F,
    origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Continuous,
    /// Integer-valued data; CDF deltas use unit steps.
    Discrete,
}

/// Default fill-in routes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefaultStrategy {
    CdfDelta,
    MemoizedPmf,
    Mle,
    CdfInversion,
    Metropolis,
    EmpiricalDraws,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    ClosedForm,
    Delegated(&'static str),
    Default(DefaultStrategy),
    Unresolvable,
}

impl Strategy {
    pub fn is_resolvable(self) -> bool {
        self != Strategy::Unresolvable
    }

    fn from_origin(o: Origin) -> Self {
        match o {
            Origin::ClosedForm => Strategy::ClosedForm,
            Origin::Delegated(k) => Strategy::Delegated(k),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::ClosedForm => write!(f, "closed-form"),
            Strategy::Delegated(kind) => write!(f, "delegated ({kind})"),
            Strategy::Default(d) => write!(
                f,
                "{}",
                match d {
                    DefaultStrategy::CdfDelta => "numeric CDF delta",
                    DefaultStrategy::MemoizedPmf => "memoized PMF",
                    DefaultStrategy::Mle => "MLE",
                    DefaultStrategy::CdfInversion => "CDF inversion",
                    DefaultStrategy::Metropolis => "Metropolis",
                    DefaultStrategy::EmpiricalDraws => "empirical draws",
                }
            ),
            Strategy::Unresolvable => write!(f, "unresolvable"),
        }
    }
}

/// Which route backs each element of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolveReport {
    pub log_likelihood: Strategy,
    pub estimate: Strategy,
    pub draw: Strategy,
    pub cdf: Strategy,
}

impl fmt::Display for ResolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "L:   {}", self.log_likelihood)?;
        writeln!(f, "Est: {}", self.estimate)?;
        writeln!(f, "RNG: {}", self.draw)?;
        write!(f, "CDF: {}", self.cdf)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub log_likelihood_at_optimum: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Distance by which the returned parameters violate the model's
    /// constraint; nonzero only for degenerate closed-form estimates.
    pub constraint_violation: f64,
}

/// A model with its parameters bound.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub model: Model,
    pub params: Params,
    pub diagnostics: Diagnostics,
}

impl FittedModel {
    /// Wraps a closed-form estimate; diagnostics are completed by
    /// [`Model::estimate`].
    pub fn closed_form(model: &Model, params: Params) -> Self {
        Self {
            model: model.clone(),
            params,
            diagnostics: Diagnostics {
                log_likelihood_at_optimum: f64::NAN,
                iterations: 0,
                converged: true,
                constraint_violation: 0.0,
            },
        }
    }
}

/// Small most-recently-used cache keyed by parameter bit patterns.
pub(crate) struct ParamCache<T> {
    entries: Mutex<Vec<(Vec<u64>, T)>>,
    capacity: usize,
}

impl<T: Clone> ParamCache<T> {
    pub(crate) fn new(capacity: usize) -> Self {
        Self {
            entries: Mutex::new(Vec::new()),
            capacity,
        }
    }

    pub(crate) fn get_or_try_insert(
        &self,
        key: Vec<u64>,
        build: impl FnOnce() -> Result<T>,
    ) -> Result<T> {
        if let Some(hit) = self
            .entries
            .lock()
            .expect("cache poisoned")
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.clone())
        {
            return Ok(hit);
        }
        let value = build()?;
        let mut entries = self.entries.lock().expect("cache poisoned");
        if entries.len() >= self.capacity {
            entries.remove(0);
        }
        entries.push((key, value.clone()));
        Ok(value)
    }
}

#[derive(Default)]
struct Caches {
    memo: Option<ParamCache<Model>>,
    draws: Option<ParamCache<Arc<Vec<Vec<f64>>>>>,
}

impl Caches {
    fn fresh() -> Arc<Self> {
        Arc::new(Caches {
            memo: Some(ParamCache::new(16)),
            draws: Some(ParamCache::new(16)),
        })
    }
}

/// A statistical model: data space, parameter space, and the elements
/// mapping between them.
#[derive(Clone)]
pub struct Model {
    label: String,
    data_dim: DataDim,
    data_kind: DataKind,
    param_shape: Params,
    log_likelihood: Option<Slot<LogLikelihood>>,
    estimate: Option<Slot<Arc<EstimateFn>>>,
    draw: Option<Slot<Arc<DrawFn>>>,
    cdf: Option<Slot<Arc<CdfFn>>>,
    constraint: Option<Arc<ConstraintFn>>,
    start: Option<Arc<StartFn>>,
    settings: Settings,
    caches: Arc<Caches>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("label", &self.label)
            .field("data_dim", &self.data_dim)
            .field("params", &self.param_shape.labels())
            .finish()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [D = {}, P = {}]",
            self.label,
            self.data_dim,
            if self.param_shape.is_empty() {
                "∅".to_string()
            } else {
                self.param_shape.labels().join(", ")
            }
        )
    }
}

/// Incremental constructor for [`Model`].
pub struct ModelBuilder {
    model: Model,
}

impl ModelBuilder {
    pub fn data_kind(mut self, kind: DataKind) -> Self {
        self.model.data_kind = kind;
        self
    }

    pub fn log_likelihood_row(
        mut self,
        f: impl Fn(&[f64], &Params) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.log_likelihood = Some(Slot {
            f: LogLikelihood::Row(Arc::new(f)),
            origin: Origin::ClosedForm,
        });
        self
    }

    pub fn log_likelihood_set(
        mut self,
        f: impl Fn(&DataSet, &Params) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.log_likelihood = Some(Slot {
            f: LogLikelihood::Set(Arc::new(f)),
            origin: Origin::ClosedForm,
        });
        self
    }

    pub fn estimator(
        mut self,
        f: impl Fn(&Model, &DataSet) -> Result<FittedModel> + Send + Sync + 'static,
    ) -> Self {
        self.model.estimate = Some(Slot {
            f: Arc::new(f),
            origin: Origin::ClosedForm,
        });
        self
    }

    pub fn sampler(
        mut self,
        f: impl Fn(&Params, &mut RandomStream) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.model.draw = Some(Slot {
            f: Arc::new(f),
            origin: Origin::ClosedForm,
        });
        self
    }

    pub fn cdf(
        mut self,
        f: impl Fn(&[f64], &Params) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        self.model.cdf = Some(Slot {
            f: Arc::new(f),
            origin: Origin::ClosedForm,
        });
        self
    }

    pub fn constraint(mut self, f: Arc<ConstraintFn>) -> Self {
        self.model.constraint = Some(f);
        self
    }

    pub fn start(mut self, f: impl Fn(&DataSet) -> Params + Send + Sync + 'static) -> Self {
        self.model.start = Some(Arc::new(f));
        self
    }

    pub fn setting(mut self, group: SettingsGroup) -> Self {
        self.model.settings.insert(group);
        self
    }

    /// Copies the data kind and the solver settings (`mle`, `mcmc`, `fill`)
    /// of a base model.
    pub fn inherit(mut self, base: &Model) -> Self {
        self.model.data_kind = base.data_kind;
        for key in ["mle", "mcmc", "fill"] {
            if let Some(g) = base.settings.get(key) {
                self.model.settings.insert(g.clone());
            }
        }
        self
    }

    /// Marks every element set so far as synthesized by `kind`.
    pub fn delegated(mut self, kind: &'static str) -> Self {
        let o = Origin::Delegated(kind);
        if let Some(s) = &mut self.model.log_likelihood {
            s.origin = o;
        }
        if let Some(s) = &mut self.model.estimate {
            s.origin = o;
        }
        if let Some(s) = &mut self.model.draw {
            s.origin = o;
        }
        if let Some(s) = &mut self.model.cdf {
            s.origin = o;
        }
        self
    }

    pub fn build(self) -> Model {
        self.model
    }
}

const CONSTRAINT_PENALTY: f64 = 1e3;

impl Model {
    pub fn builder(label: impl Into<String>, data_dim: DataDim, param_shape: Params) -> ModelBuilder {
        ModelBuilder {
            model: Model {
                label: label.into(),
                data_dim,
                data_kind: DataKind::Continuous,
                param_shape,
                log_likelihood: None,
                estimate: None,
                draw: None,
                cdf: None,
                constraint: None,
                start: None,
                settings: Settings::default(),
                caches: Caches::fresh(),
            },
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn data_dim(&self) -> DataDim {
        self.data_dim
    }

    pub fn data_kind(&self) -> DataKind {
        self.data_kind
    }

    pub fn param_shape(&self) -> &Params {
        &self.param_shape
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Copy with an extra settings group; derived-element caches are reset.
    pub fn with_setting(&self, group: SettingsGroup) -> Result<Model> {
        group.validate()?;
        let mut m = self.clone();
        m.settings.insert(group);
        m.caches = Caches::fresh();
        Ok(m)
    }

    pub fn with_label(&self, label: impl Into<String>) -> Model {
        let mut m = self.clone();
        m.label = label.into();
        m
    }

    /// Copy with a new parameter template (starting values for estimation).
    pub fn with_param_shape(&self, shape: Params) -> Result<Model> {
        if shape.len() != self.param_shape.len() {
            return Err(Error::ParamMismatch {
                expected: self.param_shape.len(),
                found: shape.len(),
            });
        }
        let mut m = self.clone();
        m.param_shape = shape;
        Ok(m)
    }

    pub fn has_constraint(&self) -> bool {
        self.constraint.is_some()
    }

    pub fn check_constraint(&self, p: &Params) -> ConstraintCheck {
        match &self.constraint {
            Some(c) => c(p),
            None => ConstraintCheck::ok(p),
        }
    }

    pub(crate) fn constraint_fn(&self) -> Option<Arc<ConstraintFn>> {
        self.constraint.clone()
    }

    pub fn log_likelihood_origin(&self) -> Option<Origin> {
        self.log_likelihood.as_ref().map(|s| s.origin)
    }

    pub fn estimate_origin(&self) -> Option<Origin> {
        self.estimate.as_ref().map(|s| s.origin)
    }

    pub fn draw_origin(&self) -> Option<Origin> {
        self.draw.as_ref().map(|s| s.origin)
    }

    pub fn cdf_origin(&self) -> Option<Origin> {
        self.cdf.as_ref().map(|s| s.origin)
    }

    /// Starting point for likelihood maximization on `d`.
    pub fn start_params(&self, d: &DataSet) -> Params {
        match &self.start {
            Some(f) => {
                let guess = f(d);
                match self.param_shape.with_values(guess.values()) {
                    Ok(p) => match self.param_shape.has_fixed() {
                        true => p.with_fixed_mask(self.param_shape.fixed_mask()).unwrap_or(guess),
                        false => p,
                    },
                    Err(_) => self.param_shape.clone(),
                }
            }
            None => self.param_shape.clone(),
        }
    }

    // ----- resolution -------------------------------------------------

    fn l_strategy(&self) -> Strategy {
        if let Some(s) = &self.log_likelihood {
            return Strategy::from_origin(s.origin);
        }
        if self.cdf.is_some() && self.data_dim.fixed().is_some_and(|d| d > 0) {
            return Strategy::Default(DefaultStrategy::CdfDelta);
        }
        if self.draw.is_some() {
            return Strategy::Default(DefaultStrategy::MemoizedPmf);
        }
        Strategy::Unresolvable
    }

    fn draw_strategy(&self) -> Strategy {
        if let Some(s) = &self.draw {
            return Strategy::from_origin(s.origin);
        }
        if self.cdf.is_some() && self.data_dim == DataDim::Fixed(1) {
            return Strategy::Default(DefaultStrategy::CdfInversion);
        }
        if self.l_strategy().is_resolvable() && self.data_dim.fixed().is_some_and(|d| d > 0) {
            return Strategy::Default(DefaultStrategy::Metropolis);
        }
        Strategy::Unresolvable
    }

    fn cdf_strategy(&self) -> Strategy {
        if let Some(s) = &self.cdf {
            return Strategy::from_origin(s.origin);
        }
        if self.draw_strategy().is_resolvable() {
            return Strategy::Default(DefaultStrategy::EmpiricalDraws);
        }
        Strategy::Unresolvable
    }

    fn est_strategy(&self) -> Strategy {
        if let Some(s) = &self.estimate {
            return Strategy::from_origin(s.origin);
        }
        if self.l_strategy().is_resolvable() {
            return Strategy::Default(DefaultStrategy::Mle);
        }
        Strategy::Unresolvable
    }

    pub fn resolve(&self) -> ResolveReport {
        ResolveReport {
            log_likelihood: self.l_strategy(),
            estimate: self.est_strategy(),
            draw: self.draw_strategy(),
            cdf: self.cdf_strategy(),
        }
    }

    // ----- checks -----------------------------------------------------

    pub(crate) fn check_params(&self, p: &Params) -> Result<()> {
        if p.len() != self.param_shape.len() {
            return Err(Error::ParamMismatch {
                expected: self.param_shape.len(),
                found: p.len(),
            });
        }
        Ok(())
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if !self.data_dim.accepts(x.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.data_dim.to_string(),
                found: format!("row of length {}", x.len()),
            });
        }
        Ok(())
    }

    pub(crate) fn check_data(&self, d: &DataSet) -> Result<()> {
        d.rows().iter().try_for_each(|r| self.check_row(r))
    }

    // ----- log-likelihood ----------------------------------------------

    /// Log-likelihood of a whole data set: the weighted sum of per-row
    /// log-likelihoods for models that factor by observation.
    pub fn log_likelihood(&self, d: &DataSet, p: &Params) -> Result<f64> {
        self.check_params(p)?;
        self.check_data(d)?;
        match &self.log_likelihood {
            Some(Slot {
                f: LogLikelihood::Set(f),
                ..
            }) => f(d, p),
            Some(Slot {
                f: LogLikelihood::Row(f),
                ..
            }) => weighted_sum(d, |x| f(x, p)),
            None => match self.l_strategy() {
                Strategy::Default(DefaultStrategy::CdfDelta) => {
                    weighted_sum(d, |x| self.cdf_delta_log_likelihood(x, p))
                }
                Strategy::Default(DefaultStrategy::MemoizedPmf) => {
                    let pmf = self.memoized_pmf(p)?;
                    weighted_sum(d, |x| pmf.log_likelihood_row(x, &Params::empty()))
                }
                _ => Err(Error::Unresolvable("log_likelihood")),
            },
        }
    }

    /// Log-likelihood of a single observation.
    pub fn log_likelihood_row(&self, x: &[f64], p: &Params) -> Result<f64> {
        match &self.log_likelihood {
            Some(Slot {
                f: LogLikelihood::Row(f),
                ..
            }) => {
                self.check_row(x)?;
                f(x, p)
            }
            _ => self.log_likelihood(&DataSet::single(x.to_vec()), p),
        }
    }

    /// Plain likelihood, `exp` of the log-likelihood.
    pub fn likelihood(&self, d: &DataSet, p: &Params) -> Result<f64> {
        self.log_likelihood(d, p).map(f64::exp)
    }

    fn cdf_delta_log_likelihood(&self, x: &[f64], p: &Params) -> Result<f64> {
        let cdf = &self.cdf.as_ref().expect("strategy checked").f;
        let k = x.len();
        let discrete = self.data_kind == DataKind::Discrete;
        let steps: Vec<f64> = x
            .iter()
            .map(|&xi| if discrete { 1.0 } else { (1e-5 * xi.abs()).max(1e-5) })
            .collect();
        // Inclusion-exclusion over the 2^k corners of the box around x.
        let mut mass = 0.0;
        let mut corner = vec![0.0; k];
        for bits in 0..(1usize << k) {
            let mut lower_count = 0;
            for j in 0..k {
                let lower = bits & (1 << j) != 0;
                corner[j] = match (discrete, lower) {
                    (true, true) => x[j] - steps[j],
                    (true, false) => x[j],
                    (false, true) => x[j] - steps[j],
                    (false, false) => x[j] + steps[j],
                };
                lower_count += lower as usize;
            }
            let sign = if lower_count % 2 == 0 { 1.0 } else { -1.0 };
            mass += sign * cdf(&corner, p)?;
        }
        let volume: f64 = if discrete {
            1.0
        } else {
            steps.iter().map(|h| 2.0 * h).product()
        };
        let density = mass / volume;
        Ok(if density > 0.0 { density.ln() } else { f64::NEG_INFINITY })
    }

    /// The PMF (optionally kernel-smoothed) memoized from seeded draws at `p`.
    pub fn memoized_pmf(&self, p: &Params) -> Result<Model> {
        let fill = self.settings.fill();
        let build = || {
            let mut stream = RandomStream::new(fill.seed);
            let pmf = solvers::memoize_rng_to_pmf(self, p, fill.draws, &mut stream)?;
            match self.settings.kde() {
                Some(kde) => solvers::kde_smooth(&pmf, kde),
                None => Ok(pmf),
            }
        };
        match &self.caches.memo {
            Some(cache) => cache.get_or_try_insert(p.key(), build),
            None => build(),
        }
    }

    // ----- estimation ---------------------------------------------------

    pub fn estimate(&self, d: &DataSet) -> Result<FittedModel> {
        let start = self.start_params(d);
        self.estimate_from(d, &start)
    }

    /// Estimates starting from `start`; entries pinned in its fixed mask
    /// are held constant by the default maximum-likelihood route.
    pub fn estimate_from(&self, d: &DataSet, start: &Params) -> Result<FittedModel> {
        self.check_params(start)?;
        self.check_data(d)?;
        if d.is_empty() && self.data_dim != DataDim::Fixed(0) {
            return Err(Error::invalid("cannot estimate from an empty data set"));
        }
        let mut fitted = match (&self.estimate, self.est_strategy()) {
            (Some(slot), _) => (slot.f)(self, d)?,
            (None, Strategy::Default(DefaultStrategy::Mle)) => self.mle(d, start)?,
            _ => return Err(Error::Unresolvable("estimate")),
        };
        if fitted.diagnostics.log_likelihood_at_optimum.is_nan() {
            fitted.diagnostics.log_likelihood_at_optimum = fitted
                .model
                .log_likelihood(d, &fitted.params)
                .unwrap_or(f64::NAN);
        }
        fitted.diagnostics.constraint_violation =
            fitted.model.check_constraint(&fitted.params).violation;
        if fitted.diagnostics.constraint_violation > 0.0 {
            log::warn!(
                "{}: estimate {} violates the model constraint by {}",
                self.label,
                fitted.params,
                fitted.diagnostics.constraint_violation
            );
        }
        Ok(fitted)
    }

    /// Log-likelihood with constraint handling used by the optimizers:
    /// infeasible points are evaluated at their projection and penalized
    /// by the violation distance.
    pub fn penalized_log_likelihood(&self, d: &DataSet, p: &Params) -> f64 {
        let check = self.check_constraint(p);
        let ll = |q: &Params| match self.log_likelihood(d, q) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        };
        if check.violation > 0.0 {
            ll(&check.projected) - CONSTRAINT_PENALTY * (1.0 + check.violation)
        } else {
            ll(p)
        }
    }

    fn mle(&self, d: &DataSet, start: &Params) -> Result<FittedModel> {
        let settings = self.settings.mle();
        let mask = start.fixed_mask();
        if mask.iter().all(|&m| m) {
            let value = self.log_likelihood(d, start)?;
            return Ok(FittedModel {
                model: self.clone(),
                params: start.clone(),
                diagnostics: Diagnostics {
                    log_likelihood_at_optimum: value,
                    iterations: 0,
                    converged: true,
                    constraint_violation: 0.0,
                },
            });
        }
        if settings.method == MleMethod::CoordinateCycle {
            return solvers::coordinate_cycle_from(self, d, start, &settings);
        }
        let objective = |p: &Params| self.penalized_log_likelihood(d, p);
        let result = match settings.method {
            MleMethod::Annealing => solvers::simulated_annealing(objective, start, &settings)?,
            _ => solvers::nelder_mead(objective, start, &settings)?,
        };
        let params = self.check_constraint(&result.params).projected;
        Ok(FittedModel {
            model: self.clone(),
            params: params.with_fixed_mask(mask).unwrap_or(result.params),
            diagnostics: Diagnostics {
                log_likelihood_at_optimum: f64::NAN,
                iterations: result.iterations,
                converged: result.converged,
                constraint_violation: 0.0,
            },
        })
    }

    // ----- sampling -------------------------------------------------------

    pub fn draw(&self, p: &Params, s: &mut RandomStream) -> Result<Vec<f64>> {
        self.check_params(p)?;
        match (&self.draw, self.draw_strategy()) {
            (Some(slot), _) => (slot.f)(p, s),
            (None, Strategy::Default(DefaultStrategy::CdfInversion)) => {
                let cdf = &self.cdf.as_ref().expect("strategy checked").f;
                let x = solvers::invert_cdf_draw(
                    |x| cdf(&[x], p),
                    s,
                    self.data_kind == DataKind::Discrete,
                )?;
                Ok(vec![x])
            }
            (None, Strategy::Default(DefaultStrategy::Metropolis)) => {
                Ok(self.metropolis_draws(p, 1, s)?.pop().expect("one draw"))
            }
            _ => Err(Error::Unresolvable("draw")),
        }
    }

    /// `n` draws as a data set. Metropolis-backed sampling runs a single
    /// chain rather than `n` independent ones.
    pub fn draw_many(&self, p: &Params, n: usize, s: &mut RandomStream) -> Result<DataSet> {
        self.check_params(p)?;
        let rows = if self.draw.is_none()
            && self.draw_strategy() == Strategy::Default(DefaultStrategy::Metropolis)
        {
            self.metropolis_draws(p, n, s)?
        } else {
            (0..n)
                .map(|_| self.draw(p, s))
                .collect::<Result<Vec<_>>>()?
        };
        match self.data_dim {
            DataDim::Variable => Ok(DataSet::variable(rows)),
            DataDim::Fixed(_) => DataSet::new(rows),
        }
    }

    fn metropolis_draws(&self, p: &Params, n: usize, s: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
        let dim = self.data_dim.fixed().unwrap_or(0);
        let target = |x: &[f64]| match self.log_likelihood_row(x, p) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        };
        let start = find_finite_start(dim, &target)?;
        let st = self.settings.mcmc();
        let chain = solvers::metropolis(
            target,
            &Params::new("x", start),
            st.proposal.as_ref(),
            &st,
            n,
            s,
        )?;
        Ok(chain.samples)
    }

    // ----- CDF ------------------------------------------------------------

    /// Cumulative probability that a draw lies componentwise at or below
    /// `x`.
    pub fn cdf(&self, x: &[f64], p: &Params) -> Result<f64> {
        self.check_params(p)?;
        self.check_row(x)?;
        match (&self.cdf, self.cdf_strategy()) {
            (Some(slot), _) => (slot.f)(x, p),
            (None, Strategy::Default(DefaultStrategy::EmpiricalDraws)) => {
                let draws = self.empirical_draws(p)?;
                let below = draws.iter().filter(|r| orthant_le(r, x)).count();
                Ok(below as f64 / draws.len() as f64)
            }
            _ => Err(Error::Unresolvable("cdf")),
        }
    }

    /// The cached seeded draw set behind the empirical CDF.
    pub fn empirical_draws(&self, p: &Params) -> Result<Arc<Vec<Vec<f64>>>> {
        let fill = self.settings.fill();
        let build = || {
            let mut stream = RandomStream::new(fill.seed);
            Ok(Arc::new(self.draw_many(p, fill.draws, &mut stream)?.rows().to_vec()))
        };
        match &self.caches.draws {
            Some(cache) => cache.get_or_try_insert(p.key(), build),
            None => build(),
        }
    }
}

fn weighted_sum(d: &DataSet, mut f: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (x, w) in d.iter() {
        if w == 0.0 {
            continue;
        }
        let v = f(x)?;
        if v == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += w * v;
    }
    Ok(total)
}

/// Start point for a data-space chain: the origin, else the first point
/// of a symmetric ladder with finite log density.
fn find_finite_start(dim: usize, target: &impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let origin = vec![0.0; dim];
    if target(&origin).is_finite() {
        return Ok(origin);
    }
    for scale in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0] {
        for sign in [1.0, -1.0] {
            let x = vec![sign * scale; dim];
            if target(&x).is_finite() {
                return Ok(x);
            }
        }
    }
    Err(Error::InfeasibleStart)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{exponential_model, normal_model};

    #[test]
    fn normal_resolves_closed_form() {
        let r = normal_model().resolve();
        assert_eq!(r.log_likelihood, Strategy::ClosedForm);
        assert_eq!(r.estimate, Strategy::ClosedForm);
        assert_eq!(r.draw, Strategy::ClosedForm);
        assert_eq!(r.cdf, Strategy::ClosedForm);
    }

    #[test]
    fn empty_model_is_unresolvable() {
        let m = Model::builder("nothing", DataDim::Fixed(1), Params::empty()).build();
        let r = m.resolve();
        for s in [r.log_likelihood, r.estimate, r.draw, r.cdf] {
            assert_eq!(s, Strategy::Unresolvable);
        }
        assert!(matches!(
            m.log_likelihood(&DataSet::from_column(&[0.0]), &Params::empty()),
            Err(Error::Unresolvable(_))
        ));
    }

    #[test]
    fn rng_only_model_uses_defaults() {
        let m = Model::builder("coin", DataDim::Fixed(1), Params::empty())
            .sampler(|_, s| Ok(vec![if s.uniform() < 0.5 { 0.0 } else { 1.0 }]))
            .build();
        let r = m.resolve();
        assert_eq!(r.log_likelihood, Strategy::Default(DefaultStrategy::MemoizedPmf));
        assert_eq!(r.estimate, Strategy::Default(DefaultStrategy::Mle));
        assert_eq!(r.cdf, Strategy::Default(DefaultStrategy::EmpiricalDraws));
        assert_eq!(r.draw, Strategy::ClosedForm);
        assert_eq!(r.log_likelihood.to_string(), "memoized PMF");
    }

    #[test]
    fn wrong_row_dimension_is_an_error() {
        let m = normal_model();
        let d = DataSet::single(vec![0.0, 1.0]);
        let p = m.param_shape().clone();
        assert!(matches!(
            m.log_likelihood(&d, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weighted_likelihood_is_weighted_sum_of_rows() {
        let m = normal_model();
        let p = Params::new("mu", vec![0.3]).with_block("sigma", vec![1.7]);
        let d = DataSet::from_column(&[0.1, -2.0, 3.5])
            .with_weights(vec![0.5, 2.0, 1.25])
            .unwrap();
        let total = m.log_likelihood(&d, &p).unwrap();
        let by_row: f64 = d
            .iter()
            .map(|(x, w)| w * m.log_likelihood_row(x, &p).unwrap())
            .sum();
        assert!((total - by_row).abs() < 1e-12);
    }

    #[test]
    fn cdf_delta_matches_density() {
        let base = exponential_model();
        let p = Params::new("lambda", vec![2.0]);
        let cdf_only = Model::builder("exp-cdf", DataDim::Fixed(1), p.clone())
            .cdf(move |x, q| base.cdf(x, q))
            .build();
        assert_eq!(
            cdf_only.resolve().log_likelihood,
            Strategy::Default(DefaultStrategy::CdfDelta)
        );
        let ll = cdf_only.log_likelihood_row(&[1.3], &p).unwrap();
        let exact = exponential_model().log_likelihood_row(&[1.3], &p).unwrap();
        assert!((ll - exact).abs() < 1e-6, "{ll} vs {exact}");
    }
}
