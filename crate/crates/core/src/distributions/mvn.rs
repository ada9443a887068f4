use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::DataDim;
use crate::error::{Error, Result};
use crate::model::{ConstraintCheck, FittedModel, Model};
use crate::params::Params;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn covariance(p: &Params, d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, &p.values()[d..d + d * d])
}

/// Multivariate Normal on R^d with mean block `mu` (length d) and
/// covariance block `sigma` (d×d, row-major). The CDF is left to the
/// empirical default.
pub fn mvn_model(d: usize) -> Model {
    let mut cov = vec![0.0; d * d];
    for j in 0..d {
        cov[j * d + j] = 1.0;
    }
    let shape = Params::new("mu", vec![0.0; d]).with_block("sigma", cov);
    Model::builder("multivariate_normal", DataDim::Fixed(d), shape)
        .log_likelihood_row(move |x, p| {
            let chol = covariance(p, d)
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite(format!("covariance {:?}", &p.values()[d..])))?;
            let diff = DVector::from_iterator(d, x.iter().zip(&p.values()[..d]).map(|(a, b)| a - b));
            let z = chol.l().solve_lower_triangular(&diff).expect("nonsingular factor");
            let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            Ok(-0.5 * (d as f64 * LN_2PI + log_det + z.norm_squared()))
        })
        .estimator(move |m, data| {
            let total = data.total_weight();
            let mut mu = vec![0.0; d];
            for (x, w) in data.iter() {
                for j in 0..d {
                    mu[j] += w * x[j] / total;
                }
            }
            let mut cov = vec![0.0; d * d];
            for (x, w) in data.iter() {
                for i in 0..d {
                    for j in 0..d {
                        cov[i * d + j] += w * (x[i] - mu[i]) * (x[j] - mu[j]) / total;
                    }
                }
            }
            mu.extend(cov);
            Ok(FittedModel::closed_form(m, m.param_shape().with_values(&mu)?))
        })
        .sampler(move |p, s| {
            let chol = covariance(p, d)
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite(format!("covariance {:?}", &p.values()[d..])))?;
            let z = DVector::from_iterator(d, (0..d).map(|_| s.standard_normal()));
            let x = chol.l() * z;
            Ok((0..d).map(|j| p.values()[j] + x[j]).collect())
        })
        .constraint(Arc::new(move |p: &Params| psd_projection(p, d)))
        .build()
}

/// Distance of the covariance block from the symmetric positive-definite
/// cone and the nearest point obtained by symmetrizing and clamping
/// eigenvalues.
fn psd_projection(p: &Params, d: usize) -> ConstraintCheck {
    let s = covariance(p, d);
    let sym = (&s + s.transpose()) * 0.5;
    let asym = (&s - &sym).abs().max();
    let eig = SymmetricEigen::new(sym.clone());
    let floor = 1e-9;
    let shortfall: f64 = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < floor { floor - l } else { 0.0 })
        .sum();
    if shortfall == 0.0 && asym == 0.0 {
        return ConstraintCheck::ok(p);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let fixed = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let mut v = p.values().to_vec();
    for i in 0..d {
        for j in 0..d {
            v[d + i * d + j] = fixed[(i, j)];
        }
    }
    ConstraintCheck {
        violation: shortfall + asym,
        projected: p.with_values(&v).expect("same layout"),
    }
}

/// Parameters for `mvn_model(mu.len())`; `cov` is row-major.
pub fn mvn_params(mu: &[f64], cov: &[f64]) -> Result<Params> {
    if cov.len() != mu.len() * mu.len() {
        return Err(Error::ParamMismatch {
            expected: mu.len() * mu.len(),
            found: cov.len(),
        });
    }
    Ok(Params::new("mu", mu.to_vec()).with_block("sigma", cov.to_vec()))
}
