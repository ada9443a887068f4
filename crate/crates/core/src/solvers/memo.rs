use std::sync::Arc;

use crate::distributions::pmf::{pmf_from, Pmf};
use crate::error::{Error, Result};
use crate::model::{DataKind, Model, Strategy};
use crate::params::Params;
use crate::settings::{KdeSettings, SettingsGroup};
use crate::stream::RandomStream;

/// PMF of `n` draws from `m` at `p`, each with weight `1/n`.
pub fn memoize_rng_to_pmf(m: &Model, p: &Params, n: usize, s: &mut RandomStream) -> Result<Model> {
    if n == 0 {
        return Err(Error::invalid("memoization needs at least one draw"));
    }
    let draws = m.draw_many(p, n, s)?;
    let pmf = Pmf::from_rows(draws.rows().to_vec(), vec![1.0; n])?;
    Ok(pmf_from(pmf).with_label(format!("pmf({})", m.label())))
}

/// Per-coordinate Silverman bandwidth `sd_j * (4 / ((d + 2) n))^(1/(d+4))`
/// from the weighted support of a PMF. A coordinate without spread gets
/// `1e-3 * max(1, |mean|)` so the kernel stays proper.
pub fn silverman_bandwidth(pmf: &Pmf) -> Vec<f64> {
    let d = pmf.dim().unwrap_or(0);
    let n = pmf.len() as f64;
    let factor = (4.0 / ((d as f64 + 2.0) * n)).powf(1.0 / (d as f64 + 4.0));
    (0..d)
        .map(|j| {
            let mean: f64 = pmf
                .support()
                .iter()
                .zip(pmf.weights())
                .map(|(r, w)| w * r[j])
                .sum();
            let var: f64 = pmf
                .support()
                .iter()
                .zip(pmf.weights())
                .map(|(r, w)| w * (r[j] - mean).powi(2))
                .sum();
            let h = var.sqrt() * factor;
            if h > 0.0 {
                h
            } else {
                1e-3 * mean.abs().max(1.0)
            }
        })
        .collect()
}

fn kernel_params(kernel: &Model, point: &[f64], rest: &Params) -> Result<Params> {
    let mut p = kernel.param_shape().clone();
    p.set_block("mu", point)?;
    for (name, vals) in rest.blocks() {
        p.set_block(name, vals)?;
    }
    Ok(p)
}

fn default_bandwidth(kernel: &Model, pmf: &Pmf) -> Result<Params> {
    let h = silverman_bandwidth(pmf);
    let d = h.len();
    match kernel.param_shape().block("sigma").map(<[f64]>::len) {
        Some(1) if d == 1 => Ok(Params::new("sigma", h)),
        Some(len) if len == d * d => {
            let mut cov = vec![0.0; d * d];
            for j in 0..d {
                cov[j * d + j] = h[j] * h[j];
            }
            Ok(Params::new("sigma", cov))
        }
        _ => Err(Error::invalid(
            "kernel needs a `sigma` block (scale or covariance) for the default bandwidth",
        )),
    }
}

/// Mixture with one kernel centred on every support point of `pmf`,
/// weighted by the PMF weights.
pub fn kde_smooth(pmf: &Model, st: &KdeSettings) -> Result<Model> {
    let support = pmf
        .settings()
        .pmf()
        .ok_or_else(|| Error::invalid("kde_smooth needs a PMF model"))?
        .clone();
    let kernel = st.kernel.clone();
    if kernel.resolve().log_likelihood != Strategy::ClosedForm {
        return Err(Error::invalid("KDE kernel needs a closed-form likelihood"));
    }
    let rest = match &st.bandwidth {
        Some(b) => b.clone(),
        None => default_bandwidth(&kernel, &support)?,
    };
    let centres: Arc<Vec<Params>> = Arc::new(
        support
            .support()
            .iter()
            .map(|x| kernel_params(&kernel, x, &rest))
            .collect::<Result<_>>()?,
    );
    // Fails early on an improper kernel (for example a singular covariance).
    let probe = kernel.log_likelihood_row(&support.support()[0], &centres[0])?;
    if probe.is_nan() {
        return Err(Error::NotPositiveDefinite(
            "kernel log-density is undefined at its own centre".into(),
        ));
    }
    let log_w: Arc<Vec<f64>> = Arc::new(support.weights().iter().map(|w| w.ln()).collect());

    let (k1, c1, w1) = (kernel.clone(), centres.clone(), log_w.clone());
    let (k2, c2, s2) = (kernel.clone(), centres.clone(), support.clone());
    let mut b = Model::builder(format!("kde({})", pmf.label()), pmf.data_dim(), Params::empty())
        .data_kind(DataKind::Continuous)
        .log_likelihood_row(move |x, _| {
            let terms: Vec<f64> = c1
                .iter()
                .zip(w1.iter())
                .map(|(c, lw)| Ok(lw + k1.log_likelihood_row(x, c)?))
                .collect::<Result<_>>()?;
            Ok(log_sum_exp(&terms))
        })
        .sampler(move |_, s| {
            let i = s2.draw_index(s);
            k2.draw(&c2[i], s)
        })
        .setting(SettingsGroup::Kde(st.clone()))
        .setting(SettingsGroup::Pmf(support.clone()));
    if kernel.resolve().cdf == Strategy::ClosedForm {
        let (k3, c3, s3) = (kernel.clone(), centres.clone(), support.clone());
        b = b.cdf(move |x, _| {
            let mut total = 0.0;
            for (c, w) in c3.iter().zip(s3.weights()) {
                total += w * k3.cdf(x, c)?;
            }
            Ok(total.clamp(0.0, 1.0))
        });
    }
    Ok(b.build())
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataSet;
    use crate::distributions::{normal_model, pmf::pmf_model};

    fn normal_kernel(sigma: f64) -> KdeSettings {
        KdeSettings {
            kernel: normal_model(),
            bandwidth: Some(Params::new("sigma", vec![sigma])),
        }
    }

    #[test]
    fn degenerate_source_memoizes_to_point_mass() {
        let m = pmf_model(&DataSet::single(vec![7.0])).unwrap();
        let mut s = RandomStream::new(3);
        let memo = memoize_rng_to_pmf(&m, &Params::empty(), 100, &mut s).unwrap();
        let pmf = memo.settings().pmf().unwrap();
        assert_eq!(pmf.support(), &[vec![7.0]]);
        assert_eq!(pmf.weights(), &[1.0]);
    }

    #[test]
    fn memoized_weights_sum_to_one() {
        let m = normal_model();
        let p = Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0]);
        let memo = memoize_rng_to_pmf(&m, &p, 1000, &mut RandomStream::new(0)).unwrap();
        let total: f64 = memo.settings().pmf().unwrap().weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_kde_is_the_kernel() {
        let pmf = pmf_model(&DataSet::from_column(&[1.5])).unwrap();
        let kde = kde_smooth(&pmf, &normal_kernel(0.7)).unwrap();
        let p = Params::new("mu", vec![1.5]).with_block("sigma", vec![0.7]);
        for x in [-1.0, 0.0, 1.5, 3.0] {
            let a = kde.log_likelihood_row(&[x], &Params::empty()).unwrap();
            let b = normal_model().log_likelihood_row(&[x], &p).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_kde_averages_kernels() {
        let pmf = pmf_model(&DataSet::from_column(&[0.0, 2.0])).unwrap();
        let kde = kde_smooth(&pmf, &normal_kernel(1.0)).unwrap();
        let n = normal_model();
        let at = |mu: f64, x: f64| {
            n.log_likelihood_row(&[x], &Params::new("mu", vec![mu]).with_block("sigma", vec![1.0]))
                .unwrap()
                .exp()
        };
        let x = 0.8;
        let got = kde.log_likelihood_row(&[x], &Params::empty()).unwrap().exp();
        assert!((got - 0.5 * (at(0.0, x) + at(2.0, x))).abs() < 1e-12);
    }

    #[test]
    fn smoothed_density_integrates_to_one() {
        let pmf = pmf_model(&DataSet::from_column(&[-1.0, 0.0, 0.5, 3.0])).unwrap();
        let kde = kde_smooth(
            &pmf,
            &KdeSettings {
                kernel: normal_model(),
                bandwidth: None,
            },
        )
        .unwrap();
        let h = 0.01;
        let total: f64 = (0..4000)
            .map(|i| -18.0 + (i as f64 + 0.5) * h)
            .map(|x| kde.log_likelihood_row(&[x], &Params::empty()).unwrap().exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }
}
