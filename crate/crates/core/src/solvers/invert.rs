use crate::error::{Error, Result};
use crate::stream::RandomStream;

const MAX_DOUBLINGS: usize = 1 << 10;

/// Draws `r ~ U(0,1)` and returns the corresponding quantile of `cdf`.
pub fn invert_cdf_draw(
    cdf: impl Fn(f64) -> Result<f64>,
    s: &mut RandomStream,
    discrete: bool,
) -> Result<f64> {
    let r = s.uniform_open();
    invert_cdf(cdf, r, discrete)
}

/// Smallest `x` with `cdf(x) >= r`: found by bracketing, bisection and
/// a final secant polish for continuous CDFs, and by integer bisection
/// when `discrete` is set.
pub fn invert_cdf(cdf: impl Fn(f64) -> Result<f64>, r: f64, discrete: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("quantile level {r} outside [0, 1]")));
    }
    let (mut lo, mut hi) = bracket(&cdf, r)?;
    if discrete {
        lo = lo.floor();
        hi = hi.ceil();
        // Invariant: cdf(lo) < r <= cdf(hi).
        while hi - lo > 1.0 {
            let mid = (lo + (hi - lo) / 2.0).floor();
            if cdf(mid)? < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(hi);
    }
    let (mut flo, mut fhi) = (cdf(lo)? - r, cdf(hi)? - r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = cdf(mid)? - r;
        if fm.abs() < 1e-6 {
            return secant_polish(&cdf, r, (lo, flo), (hi, fhi), mid, fm);
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    Ok(if flo.abs() < fhi.abs() { lo } else { hi })
}

fn bracket(cdf: &impl Fn(f64) -> Result<f64>, r: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut doublings = 0;
    while cdf(lo)? >= r && r > 0.0 {
        lo *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !lo.is_finite() {
            return Err(Error::Unbracketable { doublings, target: r });
        }
    }
    while cdf(hi)? < r {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Unbracketable { doublings, target: r });
        }
    }
    Ok((lo, hi))
}

/// Secant steps kept inside the bisection bracket.
fn secant_polish(
    cdf: &impl Fn(f64) -> Result<f64>,
    r: f64,
    (mut lo, mut flo): (f64, f64),
    (mut hi, mut fhi): (f64, f64),
    mut x: f64,
    mut fx: f64,
) -> Result<f64> {
    if fx < 0.0 {
        lo = x;
        flo = fx;
    } else {
        hi = x;
        fhi = fx;
    }
    for _ in 0..60 {
        if fx.abs() < 1e-12 {
            break;
        }
        let mut next = if fhi != flo {
            lo - flo * (hi - lo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next <= lo || next >= hi {
            break;
        }
        let fn_ = cdf(next)? - r;
        x = next;
        fx = fn_;
        if fn_ < 0.0 {
            lo = next;
            flo = fn_;
        } else {
            hi = next;
            fhi = fn_;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_identity() {
        let x = invert_cdf(|x| Ok(x.clamp(0.0, 1.0)), 0.25, false).unwrap();
        assert!((x - 0.25).abs() < 1e-10);
    }

    #[test]
    fn exponential_median() {
        let x = invert_cdf(|x| Ok(if x < 0.0 { 0.0 } else { 1.0 - (-x).exp() }), 0.5, false)
            .unwrap();
        assert!((x - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn discrete_quantile() {
        // Fair die on 1..=6.
        let cdf = |x: f64| Ok((x.floor().clamp(0.0, 6.0)) / 6.0);
        assert_eq!(invert_cdf(cdf, 0.5, true).unwrap(), 3.0);
        assert_eq!(invert_cdf(cdf, 0.51, true).unwrap(), 4.0);
        assert_eq!(invert_cdf(cdf, 1e-9, true).unwrap(), 1.0);
    }

    #[test]
    fn unbracketable_cdf() {
        assert!(matches!(
            invert_cdf(|_| Ok(0.0), 0.5, false),
            Err(Error::Unbracketable { .. })
        ));
    }
}
