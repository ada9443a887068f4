use std::sync::Arc;

use crate::data::{lex_cmp, DataSet};
use crate::error::{Error, Result};
use crate::model::{ConstraintCheck, Diagnostics, FittedModel, Model, Origin};
use crate::params::Params;
use crate::solvers::nelder_mead;
use crate::transforms::truncate::region_mass;
use crate::transforms::{record, TransformData};

const EM_MAX_ITER: usize = 1000;
const EM_TOL: f64 = 1e-10;

#[derive(Clone)]
struct Layout {
    shapes: Vec<Params>,
    lens: Vec<usize>,
}

impl Layout {
    fn components(&self, p: &Params) -> Vec<Params> {
        p.split_values(&self.lens)
            .into_iter()
            .zip(&self.shapes)
            .map(|(v, s)| s.with_values(v).expect("split by shape lengths"))
            .collect()
    }

    fn weights<'a>(&self, p: &'a Params) -> &'a [f64] {
        let n: usize = self.lens.iter().sum();
        &p.values()[n..]
    }
}

fn simplex_project(w: &[f64]) -> (Vec<f64>, f64) {
    let clamped: Vec<f64> = w.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let total: f64 = clamped.iter().sum();
    let negative: f64 = w.iter().map(|&v| if v < 0.0 || v.is_nan() { v.abs().max(1.0) } else { 0.0 }).sum();
    let raw_sum: f64 = w.iter().sum();
    let violation = negative + (raw_sum - 1.0).abs();
    let projected = if total > 0.0 {
        clamped.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / w.len() as f64; w.len()]
    };
    (projected, if violation < 1e-12 { 0.0 } else { violation })
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    crate::solvers::log_sum_exp(terms)
}

/// Finite mixture. Parameters are the component parameters followed by a
/// `weights` block on the probability simplex. Passing `weights` pins
/// them; otherwise they are estimated. Estimation uses EM when every
/// component has a closed-form estimator, joint maximum likelihood
/// otherwise.
pub fn mix(ms: &[Model], weights: Option<&[f64]>) -> Result<Model> {
    if ms.is_empty() {
        return Err(Error::invalid("mix needs at least one model"));
    }
    let dim = ms[0].data_dim();
    if let Some(bad) = ms.iter().find(|m| m.data_dim() != dim) {
        return Err(Error::space(
            format!("{} on {}", ms[0].label(), dim),
            format!("{} on {}", bad.label(), bad.data_dim()),
        ));
    }
    let k = ms.len();
    if let Some(w) = weights {
        if w.len() != k {
            return Err(Error::ParamMismatch {
                expected: k,
                found: w.len(),
            });
        }
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("mixture weights must lie on the probability simplex"));
        }
    }
    let layout = Arc::new(Layout {
        shapes: ms.iter().map(|m| m.param_shape().clone()).collect(),
        lens: ms.iter().map(|m| m.param_shape().len()).collect(),
    });
    let parts: Vec<&Params> = layout.shapes.iter().collect();
    let w0 = weights.map_or_else(|| vec![1.0 / k as f64; k], <[f64]>::to_vec);
    let mut shape = Params::concat_all(&parts, "m").with_block("weights", w0.clone());
    if weights.is_some() {
        shape = shape.pin("weights", &w0)?;
    }
    let models = Arc::new(ms.to_vec());
    let label = format!(
        "mix({})",
        ms.iter().map(Model::label).collect::<Vec<_>>().join(", ")
    );
    let mut b = Model::builder(label, dim, shape.clone()).inherit(&ms[0]);
    let reports: Vec<_> = ms.iter().map(Model::resolve).collect();

    if reports.iter().all(|r| r.log_likelihood.is_resolvable()) {
        let (ms, lay) = (models.clone(), layout.clone());
        b = b.log_likelihood_row(move |x, p| {
            let w = lay.weights(p);
            let mut terms = Vec::with_capacity(ms.len());
            for (j, pj) in lay.components(p).iter().enumerate() {
                if w[j] > 0.0 {
                    terms.push(w[j].ln() + ms[j].log_likelihood_row(x, pj)?);
                }
            }
            Ok(log_sum_exp(&terms))
        });
    }
    if reports.iter().all(|r| r.draw.is_resolvable()) {
        let (ms, lay) = (models.clone(), layout.clone());
        b = b.sampler(move |p, s| {
            let (w, _) = simplex_project(lay.weights(p));
            let u = s.uniform();
            let mut acc = 0.0;
            let mut pick = w.len() - 1;
            for (j, wj) in w.iter().enumerate() {
                acc += wj;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            ms[pick].draw(&lay.components(p)[pick], s)
        });
    }
    if reports.iter().all(|r| r.cdf.is_resolvable()) {
        let (ms, lay) = (models.clone(), layout.clone());
        b = b.cdf(move |x, p| {
            let w = lay.weights(p);
            let mut total = 0.0;
            for (j, pj) in lay.components(p).iter().enumerate() {
                if w[j] > 0.0 {
                    total += w[j] * ms[j].cdf(x, pj)?;
                }
            }
            Ok(total.clamp(0.0, 1.0))
        });
    }
    {
        let (ms, lay) = (models.clone(), layout.clone());
        b = b.constraint(Arc::new(move |p: &Params| {
            let mut violation = 0.0;
            let mut values = Vec::with_capacity(p.len());
            for (j, pj) in lay.components(p).iter().enumerate() {
                let c = ms[j].check_constraint(pj);
                violation += c.violation;
                values.extend_from_slice(c.projected.values());
            }
            let (w, v) = simplex_project(lay.weights(p));
            values.extend(w);
            ConstraintCheck {
                violation: violation + v,
                projected: p.with_values(&values).expect("same layout"),
            }
        }));
    }
    {
        let (ms, template) = (models.clone(), shape.clone());
        b = b.start(move |d| chunked_start(&ms, &template, d));
    }
    let em = ms
        .iter()
        .all(|m| m.estimate_origin() == Some(Origin::ClosedForm))
        && reports.iter().all(|r| r.log_likelihood.is_resolvable());
    if em {
        let (ms, lay) = (models.clone(), layout.clone());
        b = b.estimator(move |me, d| em_fit(me, &ms, &lay, d));
    } else if reports.iter().all(|r| r.log_likelihood.is_resolvable()) {
        let lay = layout.clone();
        b = b.estimator(move |me, d| joint_fit(me, &lay, d));
    }
    let refs: Vec<&Model> = ms.iter().collect();
    Ok(b
        .setting(record(
            "mix",
            &refs,
            TransformData::Mix {
                weights_pinned: weights.is_some(),
            },
        ))
        .delegated("mix")
        .build())
}

/// Sorts rows, cuts them into one contiguous chunk per component and
/// starts each component from its chunk.
fn chunked_start(ms: &[Model], template: &Params, d: &DataSet) -> Params {
    let k = ms.len();
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| lex_cmp(d.row(a), d.row(b)));
    let mut values = Vec::with_capacity(template.len());
    for (j, m) in ms.iter().enumerate() {
        let lo = j * idx.len() / k;
        let hi = ((j + 1) * idx.len() / k).max(lo + 1).min(idx.len());
        let chunk = d.subset(&idx[lo.min(idx.len().saturating_sub(1))..hi]);
        let guess = match m.estimate_origin() {
            Some(Origin::ClosedForm) => m
                .estimate(&chunk)
                .map(|f| m.check_constraint(&f.params).projected)
                .unwrap_or_else(|_| m.start_params(&chunk)),
            _ => m.start_params(&chunk),
        };
        values.extend_from_slice(guess.values());
    }
    let n = values.len();
    values.extend_from_slice(&template.values()[n..]);
    template.with_values(&values).unwrap_or_else(|_| template.clone())
}

fn em_fit(me: &Model, ms: &[Model], lay: &Layout, d: &DataSet) -> Result<FittedModel> {
    let start = me.start_params(d);
    let pinned = me.param_shape().fixed_mask().last().copied().unwrap_or(false);
    let k = ms.len();
    let mut comps = lay.components(&start);
    let mut w = lay.weights(&start).to_vec();
    let n = d.len();
    let mut prev = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut resp = vec![vec![0.0; k]; n];
    while iterations < EM_MAX_ITER {
        iterations += 1;
        let mut total = 0.0;
        for (i, (x, wi)) in d.iter().enumerate() {
            for j in 0..k {
                resp[i][j] = if w[j] > 0.0 {
                    w[j].ln() + ms[j].log_likelihood_row(x, &comps[j])?
                } else {
                    f64::NEG_INFINITY
                };
            }
            let lse = log_sum_exp(&resp[i]);
            total += wi * lse;
            for r in resp[i].iter_mut() {
                *r = if lse.is_finite() { (*r - lse).exp() } else { 0.0 };
            }
        }
        if total - prev < EM_TOL * total.abs().max(1.0) {
            converged = true;
            break;
        }
        prev = total;
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            let weights: Vec<f64> = (0..n).map(|i| d.weight(i) * resp[i][j]).collect();
            if weights.iter().sum::<f64>() <= 0.0 {
                next.push(comps[j].clone());
                continue;
            }
            let f = ms[j].estimate(&d.reweighted(weights))?;
            next.push(f.params);
        }
        if next
            .iter()
            .zip(ms)
            .any(|(p, m)| m.check_constraint(p).violation > 0.0)
        {
            // A component collapsed onto a point; keep the last proper fit.
            break;
        }
        comps = next;
        if !pinned {
            let tw = d.total_weight();
            w = (0..k)
                .map(|j| (0..n).map(|i| d.weight(i) * resp[i][j]).sum::<f64>() / tw)
                .collect();
        }
    }
    let mut values: Vec<f64> = comps.iter().flat_map(|p| p.values().to_vec()).collect();
    values.extend(w);
    Ok(FittedModel {
        model: me.clone(),
        params: me.param_shape().with_values(&values)?,
        diagnostics: Diagnostics {
            log_likelihood_at_optimum: f64::NAN,
            iterations,
            converged,
            constraint_violation: 0.0,
        },
    })
}

fn joint_fit(me: &Model, lay: &Layout, d: &DataSet) -> Result<FittedModel> {
    let start = me.start_params(d);
    let normalize = |p: &Params| -> Params {
        let (w, _) = simplex_project(lay.weights(p));
        let n: usize = lay.lens.iter().sum();
        let mut v = p.values()[..n].to_vec();
        v.extend(w);
        p.with_values(&v).expect("same layout")
    };
    let settings = me.settings().mle();
    let r = nelder_mead(
        |p| {
            let q = normalize(p);
            let neg: f64 = lay.weights(p).iter().filter(|v| **v < 0.0).map(|v| -v).sum();
            me.penalized_log_likelihood(d, &q) - 1e3 * neg
        },
        &start,
        &settings,
    )?;
    let params = me.check_constraint(&normalize(&r.params)).projected;
    Ok(FittedModel {
        model: me.clone(),
        params: params.with_fixed_mask(start.fixed_mask())?,
        diagnostics: Diagnostics {
            log_likelihood_at_optimum: f64::NAN,
            iterations: r.iterations,
            converged: r.converged,
            constraint_violation: 0.0,
        },
    })
}

/// Mass the truncated model's base puts outside its region at `p`: the
/// weight a censoring mixture gives to the point mass.
pub fn mix_cdf_weight(trunc: &Model, p: &Params) -> Result<f64> {
    let rec = trunc
        .settings()
        .transform()
        .filter(|r| r.kind == "truncate")
        .ok_or_else(|| Error::invalid("mix_cdf needs a truncated model"))?;
    let TransformData::Truncate { region } = &rec.data else {
        unreachable!("truncate records carry a region")
    };
    Ok(1.0 - region_mass(&rec.bases[0], region, p)?)
}

/// Censoring mixture: observations outside the truncated model's region
/// are reported as the point mass. The point mass weight is recomputed
/// from the current parameters as the base model's mass outside the
/// region.
pub fn mix_cdf(trunc: &Model, point: &Model) -> Result<Model> {
    if trunc.data_dim() != point.data_dim() {
        return Err(Error::space(
            format!("{} on {}", trunc.label(), trunc.data_dim()),
            format!("{} on {}", point.label(), point.data_dim()),
        ));
    }
    mix_cdf_weight(trunc, trunc.param_shape())?;
    if !point.param_shape().is_empty() {
        return Err(Error::invalid("mix_cdf point mass must have no parameters"));
    }
    let (t1, o1) = (trunc.clone(), point.clone());
    let (t2, o2) = (trunc.clone(), point.clone());
    let (t3, o3) = (trunc.clone(), point.clone());
    let none = Params::empty();
    let (n1, n2, n3) = (none.clone(), none.clone(), none);
    let mut b = Model::builder(
        format!("mixcdf({}, {})", trunc.label(), point.label()),
        trunc.data_dim(),
        trunc.param_shape().clone(),
    )
    .inherit(trunc)
    .log_likelihood_row(move |x, p| {
        let w = mix_cdf_weight(&t1, p)?;
        let mut terms = Vec::with_capacity(2);
        if w > 0.0 {
            terms.push(w.ln() + o1.log_likelihood_row(x, &n1)?);
        }
        if w < 1.0 {
            terms.push((-w).ln_1p() + t1.log_likelihood_row(x, p)?);
        }
        Ok(log_sum_exp(&terms))
    })
    .sampler(move |p, s| {
        let w = mix_cdf_weight(&t2, p)?;
        if s.uniform() < w {
            o2.draw(&n2, s)
        } else {
            t2.draw(p, s)
        }
    })
    .cdf(move |x, p| {
        let w = mix_cdf_weight(&t3, p)?;
        Ok(w * o3.cdf(x, &n3)? + (1.0 - w) * t3.cdf(x, p)?)
    });
    if let Some(c) = trunc.constraint_fn() {
        b = b.constraint(c);
    }
    let t4 = trunc.clone();
    b = b.start(move |d| t4.start_params(d));
    Ok(b
        .setting(record("mixcdf", &[trunc, point], TransformData::MixCdf))
        .delegated("mixcdf")
        .build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::discrete::poisson_ln_pmf;
    use crate::distributions::{normal_model, pmf_model, poisson_model};
    use crate::stream::RandomStream;
    use crate::transforms::{truncate, Region};

    #[test]
    fn point_masses_split_evenly() {
        let a = pmf_model(&DataSet::from_column(&[0.0])).unwrap();
        let b = pmf_model(&DataSet::from_column(&[1.0])).unwrap();
        let m = mix(&[a, b], Some(&[0.5, 0.5])).unwrap();
        let d = m
            .draw_many(m.param_shape(), 10_000, &mut RandomStream::new(1))
            .unwrap();
        let ones = d.column(0).iter().filter(|&&v| v == 1.0).count() as f64 / 1e4;
        assert!((ones - 0.5).abs() < 0.02);
    }

    #[test]
    fn poisson_mixture_likelihood() {
        let ms = vec![poisson_model(), poisson_model(), poisson_model()];
        let third = 1.0 / 3.0;
        let m = mix(&ms, Some(&[third, third, third])).unwrap();
        let p = m
            .param_shape()
            .with_values(&[2.8, 2.0, 1.3, third, third, third])
            .unwrap();
        let got = m.log_likelihood_row(&[2.0], &p).unwrap().exp();
        let want: f64 = [2.8, 2.0, 1.3]
            .iter()
            .map(|&l| poisson_ln_pmf(2.0, l).exp() / 3.0)
            .sum();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn em_separates_normals() {
        let src = mix(&[normal_model(), normal_model()], Some(&[0.4, 0.6])).unwrap();
        let p = src
            .param_shape()
            .with_values(&[0.0, 1.0, 10.0, 1.0, 0.4, 0.6])
            .unwrap();
        let d = src.draw_many(&p, 4000, &mut RandomStream::new(8)).unwrap();
        let free = mix(&[normal_model(), normal_model()], None).unwrap();
        let f = free.estimate(&d).unwrap();
        let v = f.params.values();
        let (lo, hi) = if v[0] < v[2] { (v[0], v[2]) } else { (v[2], v[0]) };
        assert!(lo.abs() < 0.1 && (hi - 10.0).abs() < 0.1, "{v:?}");
        assert!((v[4] + v[5] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn censoring_weight_is_half_at_zero_mean() {
        let t = truncate(&normal_model(), Region::interval(0.0, f64::INFINITY)).unwrap();
        let p = Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0]);
        assert!((mix_cdf_weight(&t, &p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn censored_draws_hit_zero_at_the_right_rate() {
        let t = truncate(&normal_model(), Region::interval(0.0, f64::INFINITY)).unwrap();
        let point = pmf_model(&DataSet::from_column(&[0.0])).unwrap();
        let m = mix_cdf(&t, &point).unwrap();
        let p = Params::new("mu", vec![-1.0]).with_block("sigma", vec![1.0]);
        let d = m.draw_many(&p, 10_000, &mut RandomStream::new(2)).unwrap();
        let zeros = d.column(0).iter().filter(|&&v| v == 0.0).count() as f64 / 1e4;
        assert!((zeros - 0.841_344_746).abs() < 0.02, "{zeros}");
    }
}
