use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ConstraintCheck, Model};
use crate::params::Params;
use crate::transforms::{record, TransformData};

/// Pins the entries flagged in `pinned`'s fixed mask at `pinned`'s values.
/// The new parameter space holds the remaining entries, starting at the
/// values `pinned` gives them.
pub fn fix(m: &Model, pinned: &Params) -> Result<Model> {
    m.check_params(pinned)?;
    let mask = pinned.fixed_mask();
    if !mask.iter().any(|&b| b) {
        return Err(Error::invalid("fix needs at least one pinned entry"));
    }
    let free_idx: Arc<Vec<usize>> = Arc::new((0..mask.len()).filter(|&i| !mask[i]).collect());
    let full = Arc::new(
        m.param_shape()
            .with_values(pinned.values())?
            .with_fixed_mask(vec![false; pinned.len()])?,
    );
    let merge = {
        let (full, idx) = (full.clone(), free_idx.clone());
        Arc::new(move |p: &Params| -> Params {
            let mut v = full.values().to_vec();
            for (&i, &x) in idx.iter().zip(p.values()) {
                v[i] = x;
            }
            full.with_values(&v).expect("same layout")
        })
    };
    let shape = free_shape(pinned, &mask);
    let report = m.resolve();
    let mut b = Model::builder(format!("fix({})", m.label()), m.data_dim(), shape).inherit(m);

    if report.log_likelihood.is_resolvable() {
        let (base, merge) = (m.clone(), merge.clone());
        b = b.log_likelihood_set(move |d, p| base.log_likelihood(d, &merge(p)));
    }
    if report.draw.is_resolvable() {
        let (base, merge) = (m.clone(), merge.clone());
        b = b.sampler(move |p, s| base.draw(&merge(p), s));
    }
    if report.cdf.is_resolvable() {
        let (base, merge) = (m.clone(), merge.clone());
        b = b.cdf(move |x, p| base.cdf(x, &merge(p)));
    }
    if m.has_constraint() {
        let (base, merge, idx) = (m.clone(), merge.clone(), free_idx.clone());
        b = b.constraint(Arc::new(move |p: &Params| {
            let c = base.check_constraint(&merge(p));
            let v: Vec<f64> = idx.iter().map(|&i| c.projected.values()[i]).collect();
            ConstraintCheck {
                violation: c.violation,
                projected: p.with_values(&v).expect("free layout"),
            }
        }));
    }
    {
        let (base, idx) = (m.clone(), free_idx.clone());
        let template = free_shape(pinned, &mask);
        b = b.start(move |d| {
            let guess = base.start_params(d);
            let v: Vec<f64> = idx.iter().map(|&i| guess.values()[i]).collect();
            template.with_values(&v).unwrap_or_else(|_| template.clone())
        });
    }
    Ok(b
        .setting(record("fix", &[m], TransformData::Fix { pinned: pinned.clone() }))
        .delegated("fix")
        .build())
}

fn free_shape(pinned: &Params, mask: &[bool]) -> Params {
    pinned
        .clone()
        .with_fixed_mask(mask.to_vec())
        .expect("mask length checked")
        .free_part()
}

/// Pins whole named blocks, e.g. `fix_named(&normal, &[("sigma", &[1.0])])`.
pub fn fix_named(m: &Model, blocks: &[(&str, &[f64])]) -> Result<Model> {
    let mut pinned = m.param_shape().clone();
    for (name, vals) in blocks {
        pinned = pinned.pin(name, vals)?;
    }
    fix(m, &pinned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataSet;
    use crate::distributions::normal_model;

    #[test]
    fn fixed_sigma_delegates_pointwise() {
        let n = normal_model();
        let f = fix_named(&n, &[("sigma", &[1.0])]).unwrap();
        assert_eq!(f.param_shape().labels(), vec!["mu"]);
        for (x, mu) in [(0.3, -1.0), (2.0, 2.0), (-4.0, 0.5)] {
            let a = f.log_likelihood_row(&[x], &Params::new("mu", vec![mu])).unwrap();
            let b = n
                .log_likelihood_row(&[x], &Params::new("mu", vec![mu]).with_block("sigma", vec![1.0]))
                .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fixed_model_estimates_free_part() {
        let f = fix_named(&normal_model(), &[("sigma", &[2.0])]).unwrap();
        let est = f.estimate(&DataSet::from_column(&[0.0, 2.0])).unwrap();
        assert!((est.params.values()[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fix_twice_equals_fix_once() {
        let n = normal_model();
        let twice = fix_named(&fix_named(&n, &[("sigma", &[1.5])]).unwrap(), &[("mu", &[0.5])]).unwrap();
        let once = fix_named(&n, &[("mu", &[0.5]), ("sigma", &[1.5])]).unwrap();
        let d = DataSet::from_column(&[0.1, 2.0, -3.0]);
        assert_eq!(
            twice.log_likelihood(&d, &Params::empty()).unwrap(),
            once.log_likelihood(&d, &Params::empty()).unwrap()
        );
        let est = once.estimate(&d).unwrap();
        assert!(est.params.is_empty());
    }

    #[test]
    fn unpinned_fix_is_rejected() {
        assert!(fix(&normal_model(), normal_model().param_shape()).is_err());
    }
}
