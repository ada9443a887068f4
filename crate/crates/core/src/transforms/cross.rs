use std::sync::Arc;

use crate::data::DataDim;
use crate::error::{Error, Result};
use crate::model::{ConstraintCheck, FittedModel, Model};
use crate::params::Params;
use crate::transforms::{record, TransformData};

fn split(p: &Params, lens: &[usize], shapes: &[Params]) -> Vec<Params> {
    p.split_values(lens)
        .into_iter()
        .zip(shapes)
        .map(|(v, s)| s.with_values(v).expect("split by shape lengths"))
        .collect()
}

/// Product model of independent components. Rows are the concatenation of
/// the components' rows and parameters the concatenation of their
/// parameters (block names prefixed `m0.`, `m1.`, ... on collision).
pub fn cross(ms: &[Model]) -> Result<Model> {
    if ms.len() < 2 {
        return Err(Error::invalid("cross needs at least two models"));
    }
    let dims: Vec<usize> = ms
        .iter()
        .map(|m| {
            m.data_dim().fixed().ok_or_else(|| {
                Error::space(m.label().to_string(), "variable-dimension data cannot be crossed")
            })
        })
        .collect::<Result<_>>()?;
    let shapes: Arc<Vec<Params>> = Arc::new(ms.iter().map(|m| m.param_shape().clone()).collect());
    let lens: Arc<Vec<usize>> = Arc::new(shapes.iter().map(Params::len).collect());
    let offsets: Arc<Vec<usize>> = Arc::new(
        dims.iter()
            .scan(0, |acc, d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect(),
    );
    let dims = Arc::new(dims);
    let parts: Vec<&Params> = shapes.iter().collect();
    let shape = Params::concat_all(&parts, "m");
    let models: Arc<Vec<Model>> = Arc::new(ms.to_vec());
    let label = format!(
        "cross({})",
        ms.iter().map(Model::label).collect::<Vec<_>>().join(", ")
    );
    let total_dim: usize = dims.iter().sum();
    let mut b = Model::builder(label, DataDim::Fixed(total_dim), shape).inherit(&ms[0]);

    let reports: Vec<_> = ms.iter().map(Model::resolve).collect();
    if reports.iter().all(|r| r.log_likelihood.is_resolvable()) {
        let (ms, sh, ln, off, dm) = (models.clone(), shapes.clone(), lens.clone(), offsets.clone(), dims.clone());
        b = b.log_likelihood_row(move |x, p| {
            let mut total = 0.0;
            for (i, pi) in split(p, &ln, &sh).iter().enumerate() {
                total += ms[i].log_likelihood_row(&x[off[i]..off[i] + dm[i]], pi)?;
                if total == f64::NEG_INFINITY {
                    break;
                }
            }
            Ok(total)
        });
    }
    if reports.iter().all(|r| r.estimate.is_resolvable()) {
        let (ms, off, dm) = (models.clone(), offsets.clone(), dims.clone());
        b = b.estimator(move |me, d| {
            let mut values = Vec::new();
            let mut iterations = 0;
            let mut converged = true;
            for i in 0..ms.len() {
                let f = ms[i].estimate(&d.slice_columns(off[i], dm[i]))?;
                values.extend_from_slice(f.params.values());
                iterations += f.diagnostics.iterations;
                converged &= f.diagnostics.converged;
            }
            let mut fitted = FittedModel::closed_form(me, me.param_shape().with_values(&values)?);
            fitted.diagnostics.iterations = iterations;
            fitted.diagnostics.converged = converged;
            Ok(fitted)
        });
    }
    if reports.iter().all(|r| r.draw.is_resolvable()) {
        let (ms, sh, ln) = (models.clone(), shapes.clone(), lens.clone());
        b = b.sampler(move |p, s| {
            let mut row = Vec::new();
            for (i, pi) in split(p, &ln, &sh).iter().enumerate() {
                row.extend(ms[i].draw(pi, s)?);
            }
            Ok(row)
        });
    }
    if reports.iter().all(|r| r.cdf.is_resolvable()) {
        let (ms, sh, ln, off, dm) = (models.clone(), shapes.clone(), lens.clone(), offsets.clone(), dims.clone());
        b = b.cdf(move |x, p| {
            let mut prod = 1.0;
            for (i, pi) in split(p, &ln, &sh).iter().enumerate() {
                prod *= ms[i].cdf(&x[off[i]..off[i] + dm[i]], pi)?;
            }
            Ok(prod)
        });
    }
    if ms.iter().any(Model::has_constraint) {
        let (ms, sh, ln) = (models.clone(), shapes.clone(), lens.clone());
        b = b.constraint(Arc::new(move |p: &Params| {
            let mut violation = 0.0;
            let mut values = Vec::with_capacity(p.len());
            for (i, pi) in split(p, &ln, &sh).iter().enumerate() {
                let c = ms[i].check_constraint(pi);
                violation += c.violation;
                values.extend_from_slice(c.projected.values());
            }
            ConstraintCheck {
                violation,
                projected: p.with_values(&values).expect("same layout"),
            }
        }));
    }
    {
        let (ms, off, dm) = (models.clone(), offsets.clone(), dims.clone());
        b = b.start(move |d| {
            let parts: Vec<Params> = (0..ms.len())
                .map(|i| ms[i].start_params(&d.slice_columns(off[i], dm[i])))
                .collect();
            let refs: Vec<&Params> = parts.iter().collect();
            Params::concat_all(&refs, "m")
        });
    }
    let refs: Vec<&Model> = ms.iter().collect();
    Ok(b
        .setting(record(
            "cross",
            &refs,
            TransformData::Cross {
                dims: dims.to_vec(),
                param_lens: lens.to_vec(),
            },
        ))
        .delegated("cross")
        .build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataSet;
    use crate::distributions::{exponential_model, normal_model};

    fn std_normal() -> Params {
        Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0])
    }

    #[test]
    fn product_rule() {
        let c = cross(&[normal_model(), normal_model()]).unwrap();
        let p = std_normal().concat(&std_normal());
        let ll = c.log_likelihood_row(&[0.0, 0.0], &p).unwrap();
        assert!((ll - 2.0 * (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln()).abs() < 1e-14);
        assert_eq!(c.param_shape().labels(), vec!["m0.mu", "m0.sigma", "m1.mu", "m1.sigma"]);
    }

    #[test]
    fn associative() {
        let (a, b, e) = (normal_model(), normal_model(), exponential_model());
        let left = cross(&[cross(&[a.clone(), b.clone()]).unwrap(), e.clone()]).unwrap();
        let right = cross(&[a, cross(&[b, e]).unwrap()]).unwrap();
        let vals = [0.3, 1.2, -0.5, 0.7, 2.0];
        let p1 = left.param_shape().with_values(&vals).unwrap();
        let p2 = right.param_shape().with_values(&vals).unwrap();
        for x in [[0.1, 0.2, 0.3], [-1.0, 2.0, 4.0]] {
            let l = left.log_likelihood_row(&x, &p1).unwrap();
            let r = right.log_likelihood_row(&x, &p2).unwrap();
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn estimate_is_componentwise() {
        let c = cross(&[normal_model(), exponential_model()]).unwrap();
        let d = DataSet::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let f = c.estimate(&d).unwrap();
        assert_eq!(f.params.values(), &[1.0, 1.0, 2.0]);
    }
}
