use rand_distr::Poisson as PoissonDist;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::data::DataDim;
use crate::distributions::continuous::weighted_mean;
use crate::error::Error;
use crate::model::{lower_bound_constraint, DataKind, FittedModel, Model};
use crate::params::Params;

pub(crate) fn poisson_ln_pmf(k: f64, lambda: f64) -> f64 {
    if k < 0.0 || k.fract() != 0.0 || lambda < 0.0 {
        return f64::NEG_INFINITY;
    }
    if lambda == 0.0 {
        return if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k * lambda.ln() - lambda - ln_gamma(k + 1.0)
}

/// Poisson(λ) on the nonnegative integers.
pub fn poisson_model() -> Model {
    Model::builder("poisson", DataDim::Fixed(1), Params::new("lambda", vec![1.0]))
        .data_kind(DataKind::Discrete)
        .log_likelihood_row(|x, p| Ok(poisson_ln_pmf(x[0], p.values()[0])))
        .estimator(|m, d| {
            Ok(FittedModel::closed_form(
                m,
                Params::new("lambda", vec![weighted_mean(d, 0)]),
            ))
        })
        .sampler(|p, s| {
            let lambda = p.values()[0];
            if lambda == 0.0 {
                return Ok(vec![0.0]);
            }
            let dist = PoissonDist::new(lambda).map_err(|e| Error::invalid(e.to_string()))?;
            Ok(vec![s.sample(&dist)])
        })
        .cdf(|x, p| {
            let k = x[0].floor();
            Ok(if k < 0.0 {
                0.0
            } else {
                gamma_ur(k + 1.0, p.values()[0])
            })
        })
        .constraint(lower_bound_constraint(&["lambda"], 1e-12))
        .start(|d| Params::new("lambda", vec![weighted_mean(d, 0).max(1e-3)]))
        .build()
}
