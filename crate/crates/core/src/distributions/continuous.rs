use std::f64::consts::PI;

use rand_distr::Beta as BetaDist;
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;

use crate::data::{DataDim, DataSet};
use crate::model::{lower_bound_constraint, ConstraintCheck, FittedModel, Model};
use crate::params::Params;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const POSITIVE: f64 = 1e-12;

pub(crate) fn weighted_mean(d: &DataSet, col: usize) -> f64 {
    let (mut s, mut w) = (0.0, 0.0);
    for (x, wi) in d.iter() {
        s += wi * x[col];
        w += wi;
    }
    s / w
}

pub(crate) fn weighted_var(d: &DataSet, col: usize, mean: f64) -> f64 {
    let (mut s, mut w) = (0.0, 0.0);
    for (x, wi) in d.iter() {
        s += wi * (x[col] - mean).powi(2);
        w += wi;
    }
    s / w
}

pub(crate) fn normal_ln_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        let z = (x - mu) / sigma;
        -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z
    } else if sigma == 0.0 && x == mu {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

pub(crate) fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        0.5 * erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2))
    } else if x >= mu {
        1.0
    } else {
        0.0
    }
}

/// Normal(μ, σ) on the real line; σ is the standard deviation.
pub fn normal_model() -> Model {
    Model::builder(
        "normal",
        DataDim::Fixed(1),
        Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0]),
    )
    .log_likelihood_row(|x, p| Ok(normal_ln_pdf(x[0], p.values()[0], p.values()[1])))
    .estimator(|m, d| {
        let mu = weighted_mean(d, 0);
        let sigma = weighted_var(d, 0, mu).sqrt();
        Ok(FittedModel::closed_form(
            m,
            m.param_shape().with_values(&[mu, sigma])?,
        ))
    })
    .sampler(|p, s| Ok(vec![p.values()[0] + p.values()[1] * s.standard_normal()]))
    .cdf(|x, p| Ok(normal_cdf(x[0], p.values()[0], p.values()[1])))
    .constraint(lower_bound_constraint(&["sigma"], POSITIVE))
    .start(|d| {
        let mu = weighted_mean(d, 0);
        let sd = weighted_var(d, 0, mu).sqrt();
        Params::new("mu", vec![mu]).with_block("sigma", vec![if sd > 0.0 { sd } else { 1.0 }])
    })
    .build()
}

/// Exponential on (0, ∞) parameterized by its mean λ.
pub fn exponential_model() -> Model {
    Model::builder("exponential", DataDim::Fixed(1), Params::new("lambda", vec![1.0]))
        .log_likelihood_row(|x, p| {
            let lambda = p.values()[0];
            Ok(if x[0] > 0.0 && lambda > 0.0 {
                -lambda.ln() - x[0] / lambda
            } else {
                f64::NEG_INFINITY
            })
        })
        .estimator(|m, d| {
            Ok(FittedModel::closed_form(
                m,
                Params::new("lambda", vec![weighted_mean(d, 0)]),
            ))
        })
        .sampler(|p, s| Ok(vec![-p.values()[0] * s.uniform_open().ln()]))
        .cdf(|x, p| {
            Ok(if x[0] > 0.0 {
                -(-x[0] / p.values()[0]).exp_m1()
            } else {
                0.0
            })
        })
        .constraint(lower_bound_constraint(&["lambda"], POSITIVE))
        .start(|d| Params::new("lambda", vec![weighted_mean(d, 0).max(POSITIVE)]))
        .build()
}

/// Beta(α, β) on (0, 1), estimated by maximum likelihood from a
/// method-of-moments start.
pub fn beta_model() -> Model {
    Model::builder(
        "beta",
        DataDim::Fixed(1),
        Params::new("alpha", vec![1.0]).with_block("beta", vec![1.0]),
    )
    .log_likelihood_row(|x, p| {
        let (a, b, x) = (p.values()[0], p.values()[1], x[0]);
        Ok(if a > 0.0 && b > 0.0 && x > 0.0 && x < 1.0 {
            (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
        } else {
            f64::NEG_INFINITY
        })
    })
    .sampler(|p, s| {
        let dist = BetaDist::new(p.values()[0], p.values()[1])
            .map_err(|e| crate::error::Error::invalid(e.to_string()))?;
        Ok(vec![s.sample(&dist)])
    })
    .cdf(|x, p| {
        Ok(if x[0] <= 0.0 {
            0.0
        } else if x[0] >= 1.0 {
            1.0
        } else {
            beta_reg(p.values()[0], p.values()[1], x[0])
        })
    })
    .constraint(lower_bound_constraint(&["alpha", "beta"], POSITIVE))
    .start(|d| {
        let m = weighted_mean(d, 0);
        let v = weighted_var(d, 0, m);
        let common = m * (1.0 - m) / v - 1.0;
        let (a, b) = if v > 0.0 && common > 0.0 && m > 0.0 && m < 1.0 {
            (m * common, (1.0 - m) * common)
        } else {
            (1.0, 1.0)
        };
        Params::new("alpha", vec![a]).with_block("beta", vec![b])
    })
    .build()
}

/// Uniform on [a, b].
pub fn uniform_model() -> Model {
    Model::builder(
        "uniform",
        DataDim::Fixed(1),
        Params::new("a", vec![0.0]).with_block("b", vec![1.0]),
    )
    .log_likelihood_row(|x, p| {
        let (a, b) = (p.values()[0], p.values()[1]);
        Ok(if b > a && x[0] >= a && x[0] <= b {
            -(b - a).ln()
        } else {
            f64::NEG_INFINITY
        })
    })
    .estimator(|m, d| {
        let col = d.column(0);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(FittedModel::closed_form(m, m.param_shape().with_values(&[lo, hi])?))
    })
    .sampler(|p, s| {
        let (a, b) = (p.values()[0], p.values()[1]);
        Ok(vec![a + (b - a) * s.uniform()])
    })
    .cdf(|x, p| {
        let (a, b) = (p.values()[0], p.values()[1]);
        Ok(((x[0] - a) / (b - a)).clamp(0.0, 1.0))
    })
    .constraint(std::sync::Arc::new(|p: &Params| {
        let (a, b) = (p.values()[0], p.values()[1]);
        if b > a {
            ConstraintCheck::ok(p)
        } else {
            let mid = 0.5 * (a + b);
            ConstraintCheck {
                violation: a - b + POSITIVE,
                projected: p
                    .with_values(&[mid - POSITIVE, mid + POSITIVE])
                    .expect("two entries"),
            }
        }
    }))
    .build()
}

/// Weibull(k, λ) on (0, ∞) with shape k and scale λ, estimated by
/// maximum likelihood.
pub fn weibull_model() -> Model {
    Model::builder(
        "weibull",
        DataDim::Fixed(1),
        Params::new("k", vec![1.0]).with_block("lambda", vec![1.0]),
    )
    .log_likelihood_row(|x, p| {
        let (k, l, x) = (p.values()[0], p.values()[1], x[0]);
        Ok(if k > 0.0 && l > 0.0 && x > 0.0 {
            (k / l).ln() + (k - 1.0) * (x / l).ln() - (x / l).powf(k)
        } else {
            f64::NEG_INFINITY
        })
    })
    .sampler(|p, s| {
        let (k, l) = (p.values()[0], p.values()[1]);
        Ok(vec![l * (-s.uniform_open().ln()).powf(1.0 / k)])
    })
    .cdf(|x, p| {
        let (k, l) = (p.values()[0], p.values()[1]);
        Ok(if x[0] > 0.0 {
            -(-(x[0] / l).powf(k)).exp_m1()
        } else {
            0.0
        })
    })
    .constraint(lower_bound_constraint(&["k", "lambda"], POSITIVE))
    .start(|d| {
        let logs = d.map_rows(|x| vec![x[0].max(POSITIVE).ln()]);
        let m = weighted_mean(&logs, 0);
        let sd = weighted_var(&logs, 0, m).sqrt();
        let k = if sd > 0.0 { PI / (6f64.sqrt() * sd) } else { 1.0 };
        Params::new("k", vec![k]).with_block("lambda", vec![(m + 0.577_215_664_9 / k).exp()])
    })
    .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::RandomStream;

    fn np(mu: f64, sigma: f64) -> Params {
        Params::new("mu", vec![mu]).with_block("sigma", vec![sigma])
    }

    #[test]
    fn normal_density_and_cdf() {
        let m = normal_model();
        let ll = m.log_likelihood_row(&[0.0], &np(0.0, 1.0)).unwrap();
        assert!((ll - (1.0 / (2.0 * PI).sqrt()).ln()).abs() < 1e-14);
        assert!((m.cdf(&[1.96], &np(0.0, 1.0)).unwrap() - 0.975).abs() < 1e-4);
        assert_eq!(m.cdf(&[0.0], &np(0.0, 1.0)).unwrap(), 0.5);
    }

    #[test]
    fn normal_estimate_uses_mle_sigma() {
        let f = normal_model()
            .estimate(&DataSet::from_column(&[0.0, 2.0]))
            .unwrap();
        assert_eq!(f.params.values(), &[1.0, 1.0]);
    }

    #[test]
    fn degenerate_normal_flags_violation() {
        let f = normal_model()
            .estimate(&DataSet::from_column(&[1.0, 1.0, 1.0]))
            .unwrap();
        assert_eq!(f.params.values(), &[1.0, 0.0]);
        assert!(f.diagnostics.constraint_violation > 0.0);
    }

    #[test]
    fn exponential_mean_parameterization() {
        let m = exponential_model();
        let f = m.estimate(&DataSet::from_column(&[1.0, 3.0])).unwrap();
        assert_eq!(f.params.values(), &[2.0]);
        let mut s = RandomStream::new(9);
        let d = m.draw_many(&Params::new("lambda", vec![1.0]), 100_000, &mut s).unwrap();
        let mean = weighted_mean(&d, 0);
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn weibull_with_unit_shape_is_exponential() {
        let w = weibull_model();
        let e = exponential_model();
        for x in [0.1, 0.7, 2.0, 9.0] {
            let a = w
                .log_likelihood_row(&[x], &Params::new("k", vec![1.0]).with_block("lambda", vec![2.5]))
                .unwrap();
            let b = e.log_likelihood_row(&[x], &Params::new("lambda", vec![2.5])).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        let p = Params::new("k", vec![0.8]).with_block("lambda", vec![5.0]);
        assert!((w.cdf(&[5.0], &p).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn uniform_estimate_is_range() {
        let f = uniform_model()
            .estimate(&DataSet::from_column(&[0.3, -1.0, 2.0]))
            .unwrap();
        assert_eq!(f.params.values(), &[-1.0, 2.0]);
    }
}
