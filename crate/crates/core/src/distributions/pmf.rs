//! Probability mass functions over a finite support of data rows.

use std::sync::Arc;

use crate::data::{lex_cmp, orthant_le, DataDim, DataSet};
use crate::error::{Error, Result};
use crate::model::{DataKind, FittedModel, Model};
use crate::params::Params;
use crate::settings::SettingsGroup;
use crate::stream::RandomStream;

/// Normalized weights over lexicographically sorted, distinct support rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf {
    support: Vec<Vec<f64>>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

fn canonical(row: &[f64]) -> Vec<f64> {
    // Folds -0.0 into 0.0 so that lookups are by numeric value.
    row.iter().map(|v| v + 0.0).collect()
}

impl Pmf {
    /// Sorts the rows, merges duplicates (summing their weights) and
    /// normalizes the weights to sum to one.
    pub fn from_rows(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Pmf> {
        if rows.len() != weights.len() {
            return Err(Error::invalid("one weight per support row required"));
        }
        if rows.is_empty() {
            return Err(Error::invalid("a PMF needs at least one support row"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("PMF weights must be finite and nonnegative"));
        }
        let mut pairs: Vec<(Vec<f64>, f64)> = rows
            .iter()
            .map(|r| canonical(r))
            .zip(weights)
            .collect();
        pairs.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        let mut support: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
        let mut merged: Vec<f64> = Vec::with_capacity(pairs.len());
        for (row, w) in pairs {
            match support.last() {
                Some(last) if lex_cmp(last, &row).is_eq() => {
                    *merged.last_mut().expect("parallel") += w;
                }
                _ => {
                    support.push(row);
                    merged.push(w);
                }
            }
        }
        let total: f64 = merged.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("PMF weights sum to zero"));
        }
        let weights: Vec<f64> = merged.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Pmf {
            support,
            weights,
            cumulative,
        })
    }

    /// Rows of `d` with their weights (1 each when unweighted).
    pub fn from_dataset(d: &DataSet) -> Result<Pmf> {
        let weights = (0..d.len()).map(|i| d.weight(i)).collect();
        Pmf::from_rows(d.rows().to_vec(), weights)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Common row dimension, `None` when the rows differ in length.
    pub fn dim(&self) -> Option<usize> {
        let d = self.support[0].len();
        self.support.iter().all(|r| r.len() == d).then_some(d)
    }

    pub fn is_integer_valued(&self) -> bool {
        self.support.iter().flatten().all(|v| v.fract() == 0.0)
    }

    pub fn weight_of(&self, x: &[f64]) -> f64 {
        let key = canonical(x);
        match self.support.binary_search_by(|r| lex_cmp(r, &key)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    /// Total weight of support rows lying componentwise at or below `x`.
    pub fn cdf(&self, x: &[f64]) -> f64 {
        if x.len() == 1 && self.dim() == Some(1) {
            let i = self.support.partition_point(|r| r[0] <= x[0]);
            return if i == 0 { 0.0 } else { self.cumulative[i - 1].min(1.0) };
        }
        let total: f64 = self
            .support
            .iter()
            .zip(&self.weights)
            .filter(|(r, _)| r.len() == x.len() && orthant_le(r, x))
            .map(|(_, w)| w)
            .sum();
        total.min(1.0)
    }

    pub fn draw(&self, s: &mut RandomStream) -> Vec<f64> {
        self.support[self.draw_index(s)].clone()
    }

    pub fn draw_index(&self, s: &mut RandomStream) -> usize {
        let u = s.uniform();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.len() - 1)
    }

    pub fn to_dataset(&self) -> DataSet {
        let d = match self.dim() {
            Some(_) => DataSet::new(self.support.clone()).expect("uniform dimension"),
            None => DataSet::variable(self.support.clone()),
        };
        d.with_weights(self.weights.clone()).expect("normalized weights")
    }
}

/// Wraps a PMF as a model. Its parameter space is empty: the support and
/// weights travel in the model's settings, and estimation returns a new
/// PMF model built from the observed frequencies.
pub fn pmf_from(pmf: Pmf) -> Model {
    let dim = match pmf.dim() {
        Some(d) => DataDim::Fixed(d),
        None => DataDim::Variable,
    };
    let kind = if pmf.is_integer_valued() {
        DataKind::Discrete
    } else {
        DataKind::Continuous
    };
    let pmf = Arc::new(pmf);
    let (l, r, c) = (pmf.clone(), pmf.clone(), pmf.clone());
    Model::builder("pmf", dim, Params::empty())
        .data_kind(kind)
        .log_likelihood_row(move |x, _| {
            let w = l.weight_of(x);
            Ok(if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
        })
        .sampler(move |_, s| Ok(r.draw(s)))
        .cdf(move |x, _| Ok(c.cdf(x)))
        .estimator(|_, d| Ok(FittedModel::closed_form(&pmf_model(d)?, Params::empty())))
        .setting(SettingsGroup::Pmf(pmf))
        .build()
}

/// PMF over the rows of `support`, weighted by the row weights.
pub fn pmf_model(support: &DataSet) -> Result<Model> {
    Ok(pmf_from(Pmf::from_dataset(support)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> DataSet {
        DataSet::from_column(&[0.0, 1.0])
    }

    #[test]
    fn coin_weights_and_likelihood() {
        let m = pmf_model(&coin()).unwrap();
        let pmf = m.settings().pmf().unwrap();
        assert_eq!(pmf.weights(), &[0.5, 0.5]);
        let ll = m
            .log_likelihood(&DataSet::from_column(&[0.0]), &Params::empty())
            .unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        let off = m.log_likelihood_row(&[2.0], &Params::empty()).unwrap();
        assert_eq!(off, f64::NEG_INFINITY);
    }

    #[test]
    fn cdf_sums_sorted_weights() {
        let d = DataSet::from_column(&[3.0, 1.0, 2.0, 2.0]);
        let m = pmf_model(&d).unwrap();
        let e = Params::empty();
        assert_eq!(m.cdf(&[0.5], &e).unwrap(), 0.0);
        assert!((m.cdf(&[2.0], &e).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(m.cdf(&[3.0], &e).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_pmf_always_draws_its_point() {
        let m = pmf_model(&DataSet::single(vec![4.0, 2.0])).unwrap();
        let mut s = RandomStream::new(0);
        for _ in 0..10 {
            assert_eq!(m.draw(&Params::empty(), &mut s).unwrap(), vec![4.0, 2.0]);
        }
    }

    #[test]
    fn estimate_normalizes_frequencies() {
        let m = pmf_model(&coin()).unwrap();
        let d = DataSet::from_column(&[1.0, 1.0, 1.0, 0.0]);
        let fitted = m.estimate(&d).unwrap();
        let pmf = fitted.model.settings().pmf().unwrap().clone();
        assert_eq!(pmf.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn negative_zero_is_zero() {
        let pmf = Pmf::from_rows(vec![vec![0.0]], vec![1.0]).unwrap();
        assert_eq!(pmf.weight_of(&[-0.0]), 1.0);
    }
}
