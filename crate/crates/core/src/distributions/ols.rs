use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::{DataDim, DataSet};
use crate::distributions::continuous::normal_ln_pdf;
use crate::distributions::pmf::Pmf;
use crate::error::{Error, Result};
use crate::model::{lower_bound_constraint, FittedModel, Model};
use crate::params::Params;

fn fitted_value(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Ordinary least squares with `regressors` explanatory columns. Rows are
/// `(y, x_1, ..., x_k)`; a constant term is added implicitly, so `beta`
/// has `k + 1` entries with the intercept first.
///
/// An estimated model remembers the design rows it saw: its likelihood is
/// zero for rows whose `x` never appeared, and its sampler draws `x` from
/// their empirical distribution.
pub fn ols_model(regressors: usize) -> Model {
    ols_with_support(regressors, None)
}

fn ols_with_support(k: usize, support: Option<Arc<Pmf>>) -> Model {
    let shape = Params::new("beta", vec![0.0; k + 1]).with_block("sigma", vec![1.0]);
    let (s1, s2) = (support.clone(), support.clone());
    let mut b = Model::builder("ols", DataDim::Fixed(k + 1), shape)
        .log_likelihood_row(move |row, p| {
            if let Some(pmf) = &s1 {
                if pmf.weight_of(&row[1..]) == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            let beta = &p.values()[..=k];
            Ok(normal_ln_pdf(row[0], fitted_value(beta, &row[1..]), p.values()[k + 1]))
        })
        .estimator(move |_, d| {
            let (beta, sigma) = least_squares(d, k)?;
            let xs: Vec<Vec<f64>> = d.rows().iter().map(|r| r[1..].to_vec()).collect();
            let weights = (0..d.len()).map(|i| d.weight(i)).collect();
            let fitted = ols_with_support(k, Some(Arc::new(Pmf::from_rows(xs, weights)?)));
            let mut values = beta;
            values.push(sigma);
            let params = fitted.param_shape().with_values(&values)?;
            Ok(FittedModel::closed_form(&fitted, params))
        })
        .constraint(lower_bound_constraint(&["sigma"], 0.0));
    if let Some(pmf) = s2 {
        b = b.sampler(move |p, s| {
            let x = pmf.draw(s);
            let beta = &p.values()[..=k];
            let y = fitted_value(beta, &x) + p.values()[k + 1] * s.standard_normal();
            let mut row = vec![y];
            row.extend(x);
            Ok(row)
        });
    }
    b.build()
}

/// Weighted normal equations `(X'WX) β = X'Wy`, with the MLE of σ from the
/// residuals.
fn least_squares(d: &DataSet, k: usize) -> Result<(Vec<f64>, f64)> {
    let n = d.len();
    let mut x = DMatrix::zeros(n, k + 1);
    let mut y = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for (i, (row, wi)) in d.iter().enumerate() {
        x[(i, 0)] = 1.0;
        for j in 0..k {
            x[(i, j + 1)] = row[j + 1];
        }
        y[i] = row[0];
        w[i] = wi;
    }
    let xtw = {
        let mut m = x.transpose();
        for (i, wi) in w.iter().enumerate() {
            m.column_mut(i).scale_mut(*wi);
        }
        m
    };
    let xtx = &xtw * &x;
    let xty = &xtw * &y;
    let svd = xtx.clone().svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if smax == 0.0 || smin / smax < 1e-12 {
        return Err(Error::CollinearDesign);
    }
    let beta = xtx
        .cholesky()
        .ok_or(Error::CollinearDesign)?
        .solve(&xty);
    let resid = &y - &x * &beta;
    let total: f64 = w.sum();
    let sse: f64 = resid.iter().zip(w.iter()).map(|(r, wi)| wi * r * r).sum();
    Ok((beta.iter().copied().collect(), (sse / total).sqrt()))
}
