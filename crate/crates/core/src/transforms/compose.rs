use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::data::{DataDim, DataSet};
use crate::distributions::pmf::{pmf_from, Pmf};
use crate::distributions::{normal_model, pmf_model};
use crate::error::{Error, Result};
use crate::model::{DefaultStrategy, FittedModel, Model, Strategy};
use crate::params::Params;
use crate::settings::{MleSettings, SettingsGroup};
use crate::solvers::{log_sum_exp, metropolis, Chain};
use crate::stream::RandomStream;
use crate::transforms::{record, TransformData};

/// Draws per likelihood evaluation of a data composition.
pub const DCOMPOSE_DRAWS: usize = 500;
/// Prior draws used by the weighted-prior-draws posterior.
pub const PRIOR_DRAWS: usize = 10_000;

/// Random number sequence behind a data composition. `Pinned` replays the
/// same seed on every likelihood call (common random numbers); `Live`
/// advances a fresh child stream each call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NSeq {
    Pinned(u64),
    Live(u64),
}

fn flatten(rows: &[Vec<f64>], to_dim: usize) -> Result<DataSet> {
    if to_dim == 0 {
        return Err(Error::invalid("cannot compose into a zero-dimensional data space"));
    }
    let mut out = Vec::new();
    for r in rows {
        if r.len() % to_dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("a multiple of {to_dim}"),
                found: r.len().to_string(),
            });
        }
        out.extend(r.chunks(to_dim).map(<[f64]>::to_vec));
    }
    DataSet::new(out)
}

/// Data composition: draws from `from` are scored by `to`. The result has
/// an empty data space and parameters `to ⊗ from`; its likelihood at `p`
/// is the `to` log-likelihood of `draws` rows drawn from `from`. When
/// `from` rows are wider than `to` rows (and a multiple of them) each row
/// is split into `to`-sized observations.
pub fn d_compose(from: &Model, to: &Model, nseq: NSeq, draws: usize) -> Result<Model> {
    let (fd, td) = match (from.data_dim(), to.data_dim()) {
        (DataDim::Fixed(a), DataDim::Fixed(b)) => (a, b),
        _ => return Err(Error::space(from.label().to_string(), to.label().to_string())),
    };
    if td == 0 || (fd != td && fd % td != 0) {
        return Err(Error::space(
            format!("{} on {}", from.label(), from.data_dim()),
            format!("{} on {}", to.label(), to.data_dim()),
        ));
    }
    if draws == 0 {
        return Err(Error::invalid("d_compose needs at least one draw"));
    }
    let (to_len, from_shape) = (to.param_shape().len(), from.param_shape().clone());
    let shape = Params::concat_all(&[to.param_shape(), from.param_shape()], "m");
    let counter = Arc::new(AtomicU64::new(0));
    let (fm, tm) = (from.clone(), to.clone());
    let to_shape = to.param_shape().clone();
    let mut b = Model::builder(
        format!("dcompose({}, {})", from.label(), to.label()),
        DataDim::Fixed(0),
        shape,
    )
    .inherit(to)
    .log_likelihood_set(move |d, p| {
        let pt = to_shape.with_values(&p.values()[..to_len])?;
        let pf = from_shape.with_values(&p.values()[to_len..])?;
        let mut s = match nseq {
            NSeq::Pinned(seed) => RandomStream::new(seed),
            NSeq::Live(seed) => RandomStream::new(seed).split(counter.fetch_add(1, Ordering::Relaxed)),
        };
        let sim = fm.draw_many(&pf, draws, &mut s)?;
        let obs = flatten(sim.rows(), td)?;
        let ll = tm.log_likelihood(&obs, &pt)?;
        Ok(d.total_weight() * ll)
    })
    .sampler(|_, _| Ok(Vec::new()))
    .cdf(|_, _| Ok(1.0));
    if from.has_constraint() || to.has_constraint() {
        let (fm, tm) = (from.clone(), to.clone());
        let (ts, fs) = (to.param_shape().clone(), from.param_shape().clone());
        b = b.constraint(Arc::new(move |p: &Params| {
            let a = tm.check_constraint(&ts.with_values(&p.values()[..to_len]).expect("layout"));
            let c = fm.check_constraint(&fs.with_values(&p.values()[to_len..]).expect("layout"));
            let mut v = a.projected.values().to_vec();
            v.extend_from_slice(c.projected.values());
            crate::model::ConstraintCheck {
                violation: a.violation + c.violation,
                projected: p.with_values(&v).expect("layout"),
            }
        }));
    }
    if matches!(nseq, NSeq::Live(_)) {
        b = b.setting(SettingsGroup::Mle(MleSettings::annealing()));
    }
    Ok(b
        .setting(record("dcompose", &[from, to], TransformData::DCompose { draws, nseq }))
        .delegated("dcompose")
        .build())
}

/// Bayesian composition of a prior over the likelihood's parameters with
/// the likelihood. The log-likelihood is `prior(p | ρ) + like(d | p)`;
/// estimation gives the posterior mode. Use [`posterior`] to sample the
/// posterior itself.
pub fn dp_compose(prior: &Model, like: &Model, rho: Option<&Params>) -> Result<Model> {
    let k = like.param_shape().len();
    if prior.data_dim() != DataDim::Fixed(k) {
        return Err(Error::space(
            format!("prior {} on {}", prior.label(), prior.data_dim()),
            format!("likelihood parameters of dimension {k}"),
        ));
    }
    let rho = rho.cloned().unwrap_or_else(|| prior.param_shape().clone());
    prior.check_params(&rho)?;
    let report = like.resolve();
    let mut b = Model::builder(
        format!("dpcompose({}, {})", prior.label(), like.label()),
        like.data_dim(),
        like.param_shape().clone(),
    )
    .inherit(like);
    if prior.resolve().log_likelihood.is_resolvable() && report.log_likelihood.is_resolvable() {
        let (pr, lk, r) = (prior.clone(), like.clone(), rho.clone());
        b = b.log_likelihood_set(move |d, p| {
            let lp = pr.log_likelihood_row(p.values(), &r)?;
            if lp == f64::NEG_INFINITY || lp.is_nan() {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(lp + lk.log_likelihood(d, p)?)
        });
    }
    if report.draw.is_resolvable() {
        let lk = like.clone();
        b = b.sampler(move |p, s| lk.draw(p, s));
    }
    if report.cdf.is_resolvable() {
        let lk = like.clone();
        b = b.cdf(move |x, p| lk.cdf(x, p));
    }
    if let Some(c) = like.constraint_fn() {
        b = b.constraint(c);
    }
    let lk = like.clone();
    b = b.start(move |d| lk.start_params(d));
    Ok(b
        .setting(record("dpcompose", &[prior, like], TransformData::DpCompose { rho }))
        .delegated("dpcompose")
        .build())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosteriorStrategy {
    /// Normal prior on the mean of a Normal with known spread.
    Conjugate,
    /// Metropolis on prior log density plus log-likelihood.
    Metropolis,
    /// Prior draws weighted by the likelihood of the data.
    WeightedPriorDraws,
}

impl fmt::Display for PosteriorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PosteriorStrategy::Conjugate => "conjugate",
            PosteriorStrategy::Metropolis => "metropolis",
            PosteriorStrategy::WeightedPriorDraws => "weighted prior draws",
        })
    }
}

/// A posterior distribution over the likelihood's parameters. `model` has
/// data space equal to that parameter space and is evaluated at `params`.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub strategy: PosteriorStrategy,
    pub model: Model,
    pub params: Params,
    pub chain: Option<Chain>,
}

impl Posterior {
    pub fn mean(&self) -> Vec<f64> {
        self.moments().0
    }

    pub fn variance(&self) -> Vec<f64> {
        self.moments().1
    }

    fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        match self.strategy {
            PosteriorStrategy::Conjugate => {
                let sd = self.params.values()[1];
                (vec![self.params.values()[0]], vec![sd * sd])
            }
            _ => {
                let pmf = self.model.settings().pmf().expect("sampled posteriors are PMFs");
                let k = pmf.dim().unwrap_or(0);
                let mut mean = vec![0.0; k];
                for (row, w) in pmf.support().iter().zip(pmf.weights()) {
                    for j in 0..k {
                        mean[j] += w * row[j];
                    }
                }
                let mut var = vec![0.0; k];
                for (row, w) in pmf.support().iter().zip(pmf.weights()) {
                    for j in 0..k {
                        var[j] += w * (row[j] - mean[j]).powi(2);
                    }
                }
                (mean, var)
            }
        }
    }
}

struct Parts {
    prior: Model,
    like: Model,
    rho: Params,
}

fn parts(m: &Model) -> Result<Parts> {
    let rec = m
        .settings()
        .transform()
        .filter(|r| r.kind == "dpcompose")
        .ok_or_else(|| Error::invalid("posterior needs a dp_compose model"))?;
    let TransformData::DpCompose { rho } = &rec.data else {
        unreachable!("dpcompose records carry rho")
    };
    Ok(Parts {
        prior: rec.bases[0].clone(),
        like: rec.bases[1].clone(),
        rho: rho.clone(),
    })
}

/// Known spread of a Normal likelihood with only its mean free.
fn known_sigma(like: &Model) -> Option<f64> {
    let rec = like.settings().transform().filter(|r| r.kind == "fix")?;
    let TransformData::Fix { pinned } = &rec.data else {
        return None;
    };
    (rec.bases[0].label() == "normal" && pinned.fixed_mask() == [false, true])
        .then(|| pinned.values()[1])
}

/// The strategy [`posterior`] picks by default for a composition.
pub fn posterior_strategy(m: &Model) -> Result<PosteriorStrategy> {
    let Parts { prior, like, .. } = parts(m)?;
    if prior.label() == "normal" && known_sigma(&like).is_some() {
        return Ok(PosteriorStrategy::Conjugate);
    }
    match prior.resolve().log_likelihood {
        Strategy::ClosedForm | Strategy::Delegated(_) | Strategy::Default(DefaultStrategy::CdfDelta) => {
            Ok(PosteriorStrategy::Metropolis)
        }
        _ if prior.resolve().draw.is_resolvable() => Ok(PosteriorStrategy::WeightedPriorDraws),
        _ => Err(Error::Unresolvable("posterior")),
    }
}

/// Posterior over the likelihood parameters of a [`dp_compose`] model
/// given data `d`. `n` is the chain length for Metropolis; the
/// weighted-draws route uses [`PRIOR_DRAWS`] draws.
pub fn posterior(
    m: &Model,
    d: &DataSet,
    n: usize,
    s: &mut RandomStream,
    strategy: Option<PosteriorStrategy>,
) -> Result<Posterior> {
    let strategy = match strategy {
        Some(st) => st,
        None => posterior_strategy(m)?,
    };
    let Parts { prior, like, rho } = parts(m)?;
    like.check_data(d)?;
    match strategy {
        PosteriorStrategy::Conjugate => {
            let sigma = known_sigma(&like)
                .filter(|_| prior.label() == "normal")
                .ok_or_else(|| Error::invalid("conjugate posterior needs Normal prior and Normal likelihood with known sigma"))?;
            let (mu0, s0) = (rho.values()[0], rho.values()[1]);
            let (w, sx) = d
                .iter()
                .fold((0.0, 0.0), |(w, sx), (x, wi)| (w + wi, sx + wi * x[0]));
            let precision = 1.0 / (s0 * s0) + w / (sigma * sigma);
            let mean = (mu0 / (s0 * s0) + sx / (sigma * sigma)) / precision;
            Ok(Posterior {
                strategy,
                model: normal_model(),
                params: Params::new("mu", vec![mean]).with_block("sigma", vec![precision.recip().sqrt()]),
                chain: None,
            })
        }
        PosteriorStrategy::Metropolis => {
            let target = |x: &[f64]| {
                let p = like.param_shape().with_values(x).expect("layout");
                m.penalized_log_likelihood(d, &p)
            };
            let mut start = like.start_params(d);
            if !target(start.values()).is_finite() {
                start = like.param_shape().clone();
            }
            let st = m.settings().mcmc();
            let chain = metropolis(target, &start, st.proposal.as_ref(), &st, n, s)?;
            let rows = DataSet::new(chain.samples.clone())?;
            Ok(Posterior {
                strategy,
                model: pmf_model(&rows)?,
                params: Params::empty(),
                chain: Some(chain),
            })
        }
        PosteriorStrategy::WeightedPriorDraws => {
            let mut rows = Vec::with_capacity(PRIOR_DRAWS);
            let mut logw = Vec::with_capacity(PRIOR_DRAWS);
            for _ in 0..PRIOR_DRAWS {
                let q = prior.draw(&rho, s)?;
                let p = like.param_shape().with_values(&q)?;
                let lw = like.log_likelihood(d, &p).unwrap_or(f64::NEG_INFINITY);
                rows.push(q);
                logw.push(if lw.is_nan() { f64::NEG_INFINITY } else { lw });
            }
            let total = log_sum_exp(&logw);
            if !total.is_finite() {
                return Err(Error::invalid("every prior draw has zero likelihood"));
            }
            let weights = logw.iter().map(|l| (l - total).exp()).collect();
            Ok(Posterior {
                strategy,
                model: pmf_from(Pmf::from_rows(rows, weights)?),
                params: Params::empty(),
                chain: None,
            })
        }
    }
}

/// Parent over child parameters. Each group of rows (see
/// [`DataSet::with_groups`]) is fitted by the child; the parent scores or
/// fits the resulting parameter vectors. Draws pick child parameters from
/// the parent, then one row from the child.
pub fn pd_compose(parent: &Model, child: &Model) -> Result<Model> {
    let k = child.param_shape().len();
    if parent.data_dim() != DataDim::Fixed(k) {
        return Err(Error::space(
            format!("parent {} on {}", parent.label(), parent.data_dim()),
            format!("child parameters of dimension {k}"),
        ));
    }
    let child_estimates = {
        let c = child.clone();
        Arc::new(move |d: &DataSet| -> Result<DataSet> {
            let rows = d
                .split_groups()
                .iter()
                .map(|g| Ok(c.estimate(g)?.params.values().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            DataSet::new(rows)
        })
    };
    let mut b = Model::builder(
        format!("pdcompose({}, {})", parent.label(), child.label()),
        child.data_dim(),
        parent.param_shape().clone(),
    )
    .inherit(child);
    let pr = parent.resolve();
    if pr.log_likelihood.is_resolvable() {
        let (pm, ce) = (parent.clone(), child_estimates.clone());
        b = b.log_likelihood_set(move |d, p| pm.log_likelihood(&ce(d)?, p));
    }
    if pr.estimate.is_resolvable() {
        let (pm, ce) = (parent.clone(), child_estimates.clone());
        b = b.estimator(move |me, d| {
            let f = pm.estimate(&ce(d)?)?;
            Ok(FittedModel {
                model: me.clone(),
                params: f.params,
                diagnostics: f.diagnostics,
            })
        });
    }
    if pr.draw.is_resolvable() && child.resolve().draw.is_resolvable() {
        let (pm, cm) = (parent.clone(), child.clone());
        b = b.sampler(move |p, s| {
            let q = pm.draw(p, s)?;
            cm.draw(&cm.param_shape().with_values(&q)?, s)
        });
    }
    if let Some(c) = parent.constraint_fn() {
        b = b.constraint(c);
    }
    {
        let (pm, ce) = (parent.clone(), child_estimates.clone());
        b = b.start(move |d| match ce(d) {
            Ok(est) => pm.start_params(&est),
            Err(_) => pm.param_shape().clone(),
        });
    }
    Ok(b
        .setting(record("pdcompose", &[parent, child], TransformData::PdCompose))
        .delegated("pdcompose")
        .build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{exponential_model, normal_model, poisson_model};
    use crate::transforms::{fix_named, mix, truncate, Region};

    fn np(mu: f64, sigma: f64) -> Params {
        Params::new("mu", vec![mu]).with_block("sigma", vec![sigma])
    }

    #[test]
    fn pinned_sequence_is_deterministic() {
        let m = d_compose(&normal_model(), &normal_model(), NSeq::Pinned(4), DCOMPOSE_DRAWS).unwrap();
        let p = m.param_shape().with_values(&[0.0, 1.0, 0.2, 1.1]).unwrap();
        let a = m.log_likelihood(&DataSet::unit(), &p).unwrap();
        let b = m.log_likelihood(&DataSet::unit(), &p).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn live_sequence_varies() {
        let m = d_compose(&normal_model(), &normal_model(), NSeq::Live(4), 50).unwrap();
        let p = m.param_shape().with_values(&[0.0, 1.0, 0.2, 1.1]).unwrap();
        let a = m.log_likelihood(&DataSet::unit(), &p).unwrap();
        let b = m.log_likelihood(&DataSet::unit(), &p).unwrap();
        assert_ne!(a, b);
        assert_eq!(m.settings().mle().method, crate::settings::MleMethod::Annealing);
    }

    #[test]
    fn self_composition_prefers_generating_params() {
        let m = d_compose(&normal_model(), &normal_model(), NSeq::Pinned(0), 200).unwrap();
        let mut wins = 0;
        for seed in 0..100 {
            let m = d_compose(&normal_model(), &normal_model(), NSeq::Pinned(seed), 200).unwrap();
            let near = m.param_shape().with_values(&[0.0, 1.0, 0.0, 1.0]).unwrap();
            let far = m.param_shape().with_values(&[10.0, 1.0, 0.0, 1.0]).unwrap();
            let u = DataSet::unit();
            if m.log_likelihood(&u, &near).unwrap() > m.log_likelihood(&u, &far).unwrap() {
                wins += 1;
            }
        }
        assert!(wins >= 95);
        assert_eq!(m.data_dim(), DataDim::Fixed(0));
    }

    #[test]
    fn wide_rows_are_flattened() {
        let two = crate::transforms::cross(&[exponential_model(), exponential_model()]).unwrap();
        let m = d_compose(&two, &exponential_model(), NSeq::Pinned(1), 10).unwrap();
        assert_eq!(m.param_shape().len(), 3);
        assert!(m.log_likelihood(&DataSet::unit(), m.param_shape()).unwrap().is_finite());
    }

    #[test]
    fn conjugate_and_metropolis_agree() {
        let like = fix_named(&normal_model(), &[("sigma", &[1.0])]).unwrap();
        let m = dp_compose(&normal_model(), &like, Some(&np(0.0, 1.0))).unwrap();
        let d = DataSet::from_column(&[2.0]);
        let mut s = RandomStream::new(3);
        let exact = posterior(&m, &d, 0, &mut s, None).unwrap();
        assert_eq!(exact.strategy, PosteriorStrategy::Conjugate);
        assert!((exact.mean()[0] - 1.0).abs() < 1e-12);
        assert!((exact.variance()[0] - 0.5).abs() < 1e-12);
        let mh = posterior(&m, &d, 100_000, &mut s, Some(PosteriorStrategy::Metropolis)).unwrap();
        assert!((mh.mean()[0] - 1.0).abs() < 0.05);
        assert!((mh.variance()[0] - 0.5).abs() < 0.05);
    }

    #[test]
    fn point_mass_prior_gives_point_posterior() {
        let prior = pmf_model(&DataSet::from_column(&[1.5])).unwrap();
        let m = dp_compose(&prior, &poisson_model(), None).unwrap();
        let d = DataSet::from_column(&[1.0, 2.0, 0.0]);
        let post = posterior(&m, &d, 0, &mut RandomStream::new(0), Some(PosteriorStrategy::WeightedPriorDraws))
            .unwrap();
        let pmf = post.model.settings().pmf().unwrap();
        assert_eq!(pmf.support(), &[vec![1.5]]);
    }

    #[test]
    fn poisson_mixture_posterior_in_range() {
        let third = 1.0 / 3.0;
        let src = mix(&[poisson_model(), poisson_model(), poisson_model()], Some(&[third; 3])).unwrap();
        let sp = src.param_shape().with_values(&[2.8, 2.0, 1.3, third, third, third]).unwrap();
        let d = src.draw_many(&sp, 10_000, &mut RandomStream::new(12)).unwrap();
        let prior = truncate(&normal_model(), Region::interval(0.0, f64::INFINITY)).unwrap();
        let m = dp_compose(&prior, &poisson_model(), Some(&np(2.0, 1.0))).unwrap();
        let mut st = m.settings().mcmc();
        st.step_scale = 0.05;
        let m = m.with_setting(SettingsGroup::Mcmc(st)).unwrap();
        let post = posterior(&m, &d, 5000, &mut RandomStream::new(13), None).unwrap();
        assert_eq!(post.strategy, PosteriorStrategy::Metropolis);
        let mean = post.mean()[0];
        assert!((1.3..=2.8).contains(&mean), "{mean}");
    }

    #[test]
    fn classroom_means() {
        let child = fix_named(&normal_model(), &[("sigma", &[1.0])]).unwrap();
        let pd = pd_compose(&normal_model(), &child).unwrap();
        let rows: Vec<f64> = vec![0.0, 2.0, 1.0, 3.0, 2.0, 4.0];
        let d = DataSet::from_column(&rows).with_groups(vec![0, 0, 1, 1, 2, 2]).unwrap();
        let f = pd.estimate(&d).unwrap();
        // Child fits are 1, 2, 3; the parent sees those rows.
        assert!((f.params.values()[0] - 2.0).abs() < 1e-6);
        assert!(pd_compose(&normal_model(), &normal_model()).is_err());
    }

    #[test]
    fn two_level_variance() {
        let child = fix_named(&normal_model(), &[("sigma", &[1.0])]).unwrap();
        let pd = pd_compose(&normal_model(), &child).unwrap();
        let d = pd.draw_many(&np(5.0, 2.0), 10_000, &mut RandomStream::new(5)).unwrap();
        let x = d.column(0);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        assert!((var - 5.0).abs() < 0.25, "{var}");
    }
}
