//! Distances between PMFs over a common support.

use std::cmp::Ordering;

use crate::data::lex_cmp;
use crate::distributions::Pmf;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::Params;

/// PMF on the anchor's support whose weights are `m`'s likelihood at each
/// support row, renormalized.
pub fn bin_to_pmf(m: &Model, p: &Params, anchor: &Pmf) -> Result<Pmf> {
    let weights = anchor
        .support()
        .iter()
        .map(|r| m.log_likelihood_row(r, p).map(f64::exp))
        .collect::<Result<Vec<f64>>>()?;
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::invalid("model puts no mass on the anchor support"));
    }
    Pmf::from_rows(anchor.support().to_vec(), weights)
}

/// Weights of `a` and `b` aligned over the sorted union of their supports.
fn matched(a: &Pmf, b: &Pmf) -> Vec<(f64, f64)> {
    let (sa, sb) = (a.support(), b.support());
    let (wa, wb) = (a.weights(), b.weights());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(sa.len().max(sb.len()));
    while i < sa.len() || j < sb.len() {
        let ord = match (sa.get(i), sb.get(j)) {
            (Some(x), Some(y)) => lex_cmp(x, y),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                out.push((wa[i], 0.0));
                i += 1;
            }
            Ordering::Greater => {
                out.push((0.0, wb[j]));
                j += 1;
            }
            Ordering::Equal => {
                out.push((wa[i], wb[j]));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Largest gap between the running sums of the two weight vectors.
pub fn ks_stat(a: &Pmf, b: &Pmf) -> f64 {
    let (mut ca, mut cb, mut worst) = (0.0, 0.0, 0.0f64);
    for (x, y) in matched(a, b) {
        ca += x;
        cb += y;
        worst = worst.max((ca - cb).abs());
    }
    worst.min(1.0)
}

/// `Σ a ln(a / b)`. Infinite, with a warning, when `b` is zero somewhere
/// `a` is not.
pub fn kl_divergence(a: &Pmf, b: &Pmf) -> f64 {
    let mut total = 0.0;
    for (x, y) in matched(a, b) {
        if x == 0.0 {
            continue;
        }
        if y == 0.0 {
            log::warn!("KL divergence is infinite: second PMF has zero weight where the first does not");
            return f64::INFINITY;
        }
        total += x * (x / y).ln();
    }
    total.max(0.0)
}

pub fn rmse(a: &Pmf, b: &Pmf) -> f64 {
    let m = matched(a, b);
    let n = m.len() as f64;
    (m.iter().map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn entropy(a: &Pmf) -> f64 {
    -a.weights()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|w| w * w.ln())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::normal_model;

    fn pmf(xs: &[f64], ws: &[f64]) -> Pmf {
        Pmf::from_rows(xs.iter().map(|&x| vec![x]).collect(), ws.to_vec()).unwrap()
    }

    #[test]
    fn identical_pmfs() {
        let a = pmf(&[0.0, 1.0, 4.0], &[0.2, 0.5, 0.3]);
        assert_eq!(ks_stat(&a, &a), 0.0);
        assert_eq!(kl_divergence(&a, &a), 0.0);
        assert_eq!(rmse(&a, &a), 0.0);
    }

    #[test]
    fn coin_entropy() {
        assert!((entropy(&pmf(&[0.0, 1.0], &[0.5, 0.5])) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_kl() {
        let a = pmf(&[0.0, 1.0], &[0.5, 0.5]);
        let b = pmf(&[0.0, 1.0], &[0.75, 0.25]);
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl_divergence(&a, &b) - want).abs() < 1e-12);
        assert!((want - 0.1438).abs() < 1e-4);
    }

    #[test]
    fn zero_in_second_is_infinite() {
        let a = pmf(&[0.0, 1.0], &[0.5, 0.5]);
        let b = pmf(&[0.0], &[1.0]);
        assert_eq!(kl_divergence(&a, &b), f64::INFINITY);
        assert!((ks_stat(&a, &b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn binning() {
        let p = Params::new("mu", vec![0.0]).with_block("sigma", vec![1.0]);
        let one = bin_to_pmf(&normal_model(), &p, &pmf(&[0.3], &[1.0])).unwrap();
        assert_eq!(one.weights(), &[1.0]);
        let three = bin_to_pmf(&normal_model(), &p, &pmf(&[-1.0, 0.0, 1.0], &[1.0, 1.0, 1.0])).unwrap();
        let (f1, f0) = ((-0.5f64).exp(), 1.0);
        let z = 2.0 * f1 + f0;
        for (w, want) in three.weights().iter().zip([f1 / z, f0 / z, f1 / z]) {
            assert!((w - want).abs() < 1e-12);
        }
    }
}
