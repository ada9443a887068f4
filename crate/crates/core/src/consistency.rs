//! Empirical check that a model's elements agree with each other.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{lex_cmp, orthant_le, DataSet};
use crate::error::{Error, Result};
use crate::model::{DataKind, Model};
use crate::params::Params;
use crate::stream::RandomStream;

const MIN_DRAWS: usize = 100;
const CONTINUOUS_BINS: usize = 20;
const QUADRATURE_POINTS: usize = 64;
const MAX_DISCRETE_BINS: usize = 50;
const CDF_PROBES: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyTolerances {
    /// Minimum chi-square p-value.
    pub chi_square_alpha: f64,
    /// Maximum distance between the draws' empirical CDF and the CDF.
    pub cdf: f64,
    /// Maximum per-coordinate distance between re-estimated and true
    /// parameters.
    pub estimate: f64,
}

impl Default for ConsistencyTolerances {
    fn default() -> Self {
        Self {
            chi_square_alpha: 0.01,
            cdf: 0.05,
            estimate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareCheck {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// Binned draw counts against binned likelihood mass. `None` for
    /// continuous data of dimension above one, where the bin masses would
    /// need multivariate quadrature.
    pub chi_square: Option<ChiSquareCheck>,
    pub cdf_max_diff: f64,
    pub cdf_pass: bool,
    pub estimate_diff: Vec<f64>,
    pub estimate_pass: bool,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.chi_square.as_ref().is_none_or(|c| c.pass) && self.cdf_pass && self.estimate_pass
    }
}

/// Draws `n` rows at `p` and compares them with the likelihood, the CDF
/// and the estimator.
pub fn check_ml_consistency(
    m: &Model,
    p: &Params,
    s: &mut RandomStream,
    n: usize,
    tol: &ConsistencyTolerances,
) -> Result<ConsistencyReport> {
    if n < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            needed: MIN_DRAWS,
            got: n,
        });
    }
    let draws = m.draw_many(p, n, s)?;
    let dim = draws.dim().unwrap_or(0);
    let discrete = m.data_kind() == DataKind::Discrete
        || draws.rows().iter().flatten().all(|v| v.fract() == 0.0);
    let chi_square = if discrete {
        Some(chi_square_discrete(m, p, &draws)?)
    } else if dim == 1 {
        Some(chi_square_continuous(m, p, &draws)?)
    } else {
        None
    }
    .map(|(statistic, df)| {
        let p_value = if df == 0 {
            1.0
        } else {
            1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(statistic)
        };
        ChiSquareCheck {
            statistic,
            df,
            p_value,
            pass: p_value >= tol.chi_square_alpha,
        }
    });

    let cdf_max_diff = cdf_distance(m, p, &draws)?;
    let fitted = m.estimate(&draws)?;
    let estimate_diff: Vec<f64> = fitted
        .params
        .values()
        .iter()
        .zip(p.values())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(ConsistencyReport {
        chi_square,
        cdf_pass: cdf_max_diff <= tol.cdf,
        cdf_max_diff,
        estimate_pass: estimate_diff.iter().all(|d| *d <= tol.estimate),
        estimate_diff,
    })
}

/// Distinct draw values (the most frequent ones) as bins plus one bin for
/// everything else.
fn chi_square_discrete(m: &Model, p: &Params, draws: &DataSet) -> Result<(f64, usize)> {
    let mut rows = draws.rows().to_vec();
    rows.sort_by(|a, b| lex_cmp(a, b));
    let mut counts: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in rows {
        match counts.last_mut() {
            Some((last, c)) if lex_cmp(last, &r).is_eq() => *c += 1.0,
            _ => counts.push((r, 1.0)),
        }
    }
    counts.sort_by(|a, b| b.1.total_cmp(&a.1));
    counts.truncate(MAX_DISCRETE_BINS);
    let n = draws.len() as f64;
    let mut stat = 0.0;
    let mut bins: usize = 0;
    let (mut seen_obs, mut seen_mass) = (0.0, 0.0);
    for (row, obs) in &counts {
        let mass = m.log_likelihood_row(row, p)?.exp();
        seen_obs += obs;
        seen_mass += mass;
        if mass > 0.0 {
            stat += (obs - n * mass).powi(2) / (n * mass);
            bins += 1;
        } else {
            stat = f64::INFINITY;
        }
    }
    let rest_mass = (1.0 - seen_mass).max(0.0);
    let rest_obs = n - seen_obs;
    if rest_mass * n > 1e-9 {
        stat += (rest_obs - n * rest_mass).powi(2) / (n * rest_mass);
        bins += 1;
    }
    Ok((stat, bins.saturating_sub(1)))
}

/// Quantile bins of the draws; bin masses integrate the likelihood over
/// the draws' range and are renormalized, so likelihoods off by a
/// constant factor still pass.
fn chi_square_continuous(m: &Model, p: &Params, draws: &DataSet) -> Result<(f64, usize)> {
    let mut x = draws.column(0);
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let mut edges: Vec<f64> = (0..=CONTINUOUS_BINS)
        .map(|i| x[(i * (n - 1)) / CONTINUOUS_BINS])
        .collect();
    edges.dedup();
    let mut mass = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let h = (w[1] - w[0]) / QUADRATURE_POINTS as f64;
        let mut total = 0.0;
        for i in 0..QUADRATURE_POINTS {
            let t = w[0] + (i as f64 + 0.5) * h;
            let v = m.log_likelihood_row(&[t], p)?.exp();
            if v.is_finite() {
                total += v * h;
            }
        }
        mass.push(total);
    }
    let total_mass: f64 = mass.iter().sum();
    if !(total_mass > 0.0) {
        return Ok((f64::INFINITY, mass.len().saturating_sub(1)));
    }
    let mut stat = 0.0;
    for (i, w) in edges.windows(2).enumerate() {
        let last = i + 2 == edges.len();
        let obs = x
            .iter()
            .filter(|&&v| v >= w[0] && (v < w[1] || (last && v <= w[1])))
            .count() as f64;
        let expected = n as f64 * mass[i] / total_mass;
        stat += if expected > 0.0 {
            (obs - expected).powi(2) / expected
        } else if obs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    Ok((stat, mass.len().saturating_sub(1)))
}

fn cdf_distance(m: &Model, p: &Params, draws: &DataSet) -> Result<f64> {
    let n = draws.len() as f64;
    if draws.dim() == Some(1) {
        let mut x = draws.column(0);
        x.sort_by(f64::total_cmp);
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < x.len() {
            let mut j = i;
            while j < x.len() && x[j] == x[i] {
                j += 1;
            }
            let f = m.cdf(&[x[i]], p)?;
            worst = worst.max((j as f64 / n - f).abs());
            // For continuous models the gap just below a jump counts too.
            if m.data_kind() != DataKind::Discrete {
                worst = worst.max((i as f64 / n - f).abs());
            }
            i = j;
        }
        return Ok(worst);
    }
    let step = (draws.len() / CDF_PROBES).max(1);
    let mut worst: f64 = 0.0;
    for probe in draws.rows().iter().step_by(step) {
        let below = draws.rows().iter().filter(|r| orthant_le(r, probe)).count() as f64 / n;
        worst = worst.max((below - m.cdf(probe, p)?).abs());
    }
    Ok(worst)
}
