use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::model::{FittedModel, Model};
use crate::params::Params;
use crate::solvers::numeric_hessian;
use crate::stream::RandomStream;

const MAX_FAILURE_SHARE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovMethod {
    Bootstrap,
    Jackknife,
    Fisher,
    Replication,
}

impl fmt::Display for CovMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovMethod::Bootstrap => "bootstrap",
            CovMethod::Jackknife => "jackknife",
            CovMethod::Fisher => "fisher",
            CovMethod::Replication => "replication",
        })
    }
}

/// Parameter covariance with the labels of its rows and columns.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
    pub method: CovMethod,
    pub replicates: usize,
    /// Replicates whose estimate failed and were left out.
    pub failures: usize,
}

impl CovarianceEstimate {
    pub fn variance(&self, i: usize) -> f64 {
        self.matrix[(i, i)]
    }

    /// Header row of labels, then one labelled row per parameter.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend((0..self.labels.len()).map(|j| self.matrix[(i, j)].to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn sample_cov(reps: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    // Shifted by the first replicate so identical replicates give exact zeros.
    let n = reps.len() as f64;
    let dev: Vec<Vec<f64>> = reps
        .iter()
        .map(|r| (0..k).map(|j| r[j] - reps[0][j]).collect())
        .collect();
    let mean: Vec<f64> = (0..k).map(|j| dev.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut c = DMatrix::zeros(k, k);
    for r in &dev {
        for i in 0..k {
            for j in 0..k {
                c[(i, j)] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c
}

/// Runs `reps` replicate estimates, skipping failures, and errors when more
/// than a fifth fail.
fn collect(reps: usize, mut one: impl FnMut(usize) -> Result<Vec<f64>>) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut out = Vec::with_capacity(reps);
    let mut failed = 0;
    for i in 0..reps {
        match one(i) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => out.push(v),
            Ok(_) | Err(_) => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILURE_SHARE * reps as f64 || out.len() < 2 {
        return Err(Error::TooManyFailures {
            failed,
            total: reps,
        });
    }
    if failed > 0 {
        log::warn!("{failed} of {reps} replicates failed and were skipped");
    }
    Ok((out, failed))
}

fn estimate_values(m: &Model, d: &DataSet) -> Result<Vec<f64>> {
    Ok(m.estimate(d)?.params.values().to_vec())
}

/// Covariance of estimates over resamples of `d` drawn with replacement.
pub fn bootstrap_cov(m: &Model, d: &DataSet, reps: usize, s: &mut RandomStream) -> Result<CovarianceEstimate> {
    if d.len() < 10 {
        return Err(Error::invalid("bootstrap needs at least 10 rows"));
    }
    if reps < 100 {
        return Err(Error::invalid("bootstrap needs at least 100 replicates"));
    }
    let n = d.len();
    let (vals, failures) = collect(reps, |_| {
        let idx: Vec<usize> = (0..n).map(|_| s.index(n)).collect();
        estimate_values(m, &d.subset(&idx))
    })?;
    let k = m.param_shape().len();
    let c = sample_cov(&vals, k) / (vals.len() as f64 - 1.0);
    Ok(CovarianceEstimate {
        matrix: c,
        labels: m.param_shape().labels(),
        method: CovMethod::Bootstrap,
        replicates: vals.len(),
        failures,
    })
}

/// Delete-`leave_out` jackknife over consecutive blocks of rows: with `g`
/// blocks, the covariance is `(g - 1) / g` times the sum of squared
/// deviations of the block-deleted estimates.
pub fn jackknife_cov(m: &Model, d: &DataSet, leave_out: usize) -> Result<CovarianceEstimate> {
    if leave_out == 0 {
        return Err(Error::invalid("leave_out must be positive"));
    }
    if d.len() < 10 {
        return Err(Error::invalid("jackknife needs at least 10 rows"));
    }
    let groups = d.len() / leave_out;
    if groups < 2 {
        return Err(Error::invalid("leave_out leaves fewer than two blocks"));
    }
    let (vals, failures) = collect(groups, |g| {
        let idx: Vec<usize> = (0..d.len())
            .filter(|&i| i / leave_out != g)
            .collect();
        estimate_values(m, &d.subset(&idx))
    })?;
    let k = m.param_shape().len();
    let g = vals.len() as f64;
    let c = sample_cov(&vals, k) * ((g - 1.0) / g);
    Ok(CovarianceEstimate {
        matrix: c,
        labels: m.param_shape().labels(),
        method: CovMethod::Jackknife,
        replicates: vals.len(),
        failures,
    })
}

/// Simple replication: draw `n` rows from `source` at `p`, fit `fit`, and
/// repeat. The spread of the fitted parameters is the estimate.
pub fn replication_cov(
    source: &Model,
    p: &Params,
    n: usize,
    fit: &Model,
    reps: usize,
    s: &mut RandomStream,
) -> Result<CovarianceEstimate> {
    if reps < 2 || n == 0 {
        return Err(Error::invalid("replication needs at least two replicates of nonempty data"));
    }
    let (vals, failures) = collect(reps, |_| {
        let d = source.draw_many(p, n, s)?;
        estimate_values(fit, &d)
    })?;
    let k = fit.param_shape().len();
    let c = sample_cov(&vals, k) / (vals.len() as f64 - 1.0);
    Ok(CovarianceEstimate {
        matrix: c,
        labels: fit.param_shape().labels(),
        method: CovMethod::Replication,
        replicates: vals.len(),
        failures,
    })
}

/// Inverse of the negative Hessian of the log-likelihood at the estimate,
/// over the free parameters (pinned entries get zero rows and columns).
pub fn fisher_info_cov(fm: &FittedModel, d: &DataSet) -> Result<CovarianceEstimate> {
    let mask = fm.params.fixed_mask();
    let free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    let full = fm.params.clone().with_fixed_mask(vec![false; mask.len()])?;
    let free_params = Params::new("free", free.iter().map(|&i| full.values()[i]).collect());
    let f = |q: &Params| {
        let mut v = full.values().to_vec();
        for (&i, &x) in free.iter().zip(q.values()) {
            v[i] = x;
        }
        match full.with_values(&v) {
            Ok(p) => fm.model.log_likelihood(d, &p).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        }
    };
    let h = numeric_hessian(f, &free_params)?;
    let neg = -h;
    let eig = SymmetricEigen::new(neg.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotInteriorMaximum {
            eigenvalues: eig.eigenvalues.iter().map(|l| -l).collect(),
        });
    }
    let inv = neg
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("negative Hessian".into()))?
        .inverse();
    let k = mask.len();
    let mut c = DMatrix::zeros(k, k);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            c[(i, j)] = inv[(a, b)];
        }
    }
    Ok(CovarianceEstimate {
        matrix: c,
        labels: fm.params.labels(),
        method: CovMethod::Fisher,
        replicates: 0,
        failures: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataDim;
    use crate::distributions::{exponential_model, normal_model, pmf_model};
    use crate::transforms::fix_named;

    fn normal_data(n: usize, seed: u64) -> DataSet {
        let p = Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0]);
        normal_model().draw_many(&p, n, &mut RandomStream::new(seed)).unwrap()
    }

    #[test]
    fn constant_data_has_zero_spread() {
        let d = DataSet::from_column(&[2.0; 20]);
        let c = bootstrap_cov(&exponential_model(), &d, 100, &mut RandomStream::new(0)).unwrap();
        assert_eq!(c.variance(0), 0.0);
        let j = jackknife_cov(&exponential_model(), &d, 1).unwrap();
        assert_eq!(j.variance(0), 0.0);
    }

    #[test]
    fn bootstrap_matches_asymptotics() {
        let d = normal_data(200, 1);
        let b = bootstrap_cov(&normal_model(), &d, 500, &mut RandomStream::new(2)).unwrap();
        let v = b.variance(0);
        assert!((v - 1.0 / 200.0).abs() < 0.5 / 200.0, "{v}");
        let j = jackknife_cov(&normal_model(), &d, 1).unwrap();
        let ratio = j.variance(0) / v;
        assert!((0.5..2.0).contains(&ratio));
        let f = fisher_info_cov(&normal_model().estimate(&d).unwrap(), &d).unwrap();
        let ratio = f.variance(0) / v;
        assert!((0.5..2.0).contains(&ratio));
    }

    #[test]
    fn fisher_known_sigma() {
        let m = fix_named(&normal_model(), &[("sigma", &[1.0])]).unwrap();
        for n in [50, 100, 200] {
            let d = normal_data(n, n as u64);
            let fm = m.estimate(&d).unwrap();
            let c = fisher_info_cov(&fm, &d).unwrap();
            assert!((c.variance(0) - 1.0 / n as f64).abs() < 1e-3);
        }
    }

    #[test]
    fn linear_likelihood_is_not_a_maximum() {
        let m = Model::builder("linear", DataDim::Fixed(1), Params::new("a", vec![0.0]))
            .log_likelihood_row(|x, p| Ok(x[0] * p.values()[0]))
            .build();
        let fm = FittedModel::closed_form(&m, Params::new("a", vec![1.0]));
        let r = fisher_info_cov(&fm, &DataSet::from_column(&[1.0]));
        assert!(matches!(r, Err(Error::NotInteriorMaximum { .. })));
    }

    #[test]
    fn point_mass_replication() {
        let src = pmf_model(&DataSet::from_column(&[4.0])).unwrap();
        let c = replication_cov(&src, &Params::empty(), 10, &exponential_model(), 20, &mut RandomStream::new(0))
            .unwrap();
        assert_eq!(c.variance(0), 0.0);
    }

    #[test]
    fn csv_has_labels() {
        let c = CovarianceEstimate {
            matrix: DMatrix::identity(2, 2),
            labels: vec!["mu".into(), "sigma".into()],
            method: CovMethod::Fisher,
            replicates: 0,
            failures: 0,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), ",mu,sigma\nmu,1,0\nsigma,0,1\n");
    }
}
