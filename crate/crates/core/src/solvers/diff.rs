use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::params::Params;

fn eval(f: &impl Fn(&Params) -> f64, x: &Params, v: &[f64]) -> Result<f64> {
    let y = f(&x.with_values(v)?);
    if !y.is_finite() {
        return Err(Error::NonFinite { point: v.to_vec() });
    }
    Ok(y)
}

/// Central-difference gradient with step `cbrt(eps) * max(1, |x_i|)`.
pub fn numeric_gradient(f: impl Fn(&Params) -> f64, x: &Params) -> Result<Vec<f64>> {
    let h0 = f64::EPSILON.cbrt();
    let mut v = x.values().to_vec();
    (0..v.len())
        .map(|i| {
            let xi = v[i];
            let h = h0 * xi.abs().max(1.0);
            v[i] = xi + h;
            let up = eval(&f, x, &v);
            v[i] = xi - h;
            let down = eval(&f, x, &v);
            v[i] = xi;
            Ok((up? - down?) / (2.0 * h))
        })
        .collect()
}

/// Central-difference Hessian, symmetrized. The step is
/// `eps^(1/4) * max(1, |x_i|)`, the balance point of truncation and
/// rounding error for a second difference.
pub fn numeric_hessian(f: impl Fn(&Params) -> f64, x: &Params) -> Result<DMatrix<f64>> {
    let n = x.len();
    let h0 = f64::EPSILON.powf(0.25);
    let base = x.values().to_vec();
    let h: Vec<f64> = base.iter().map(|xi| h0 * xi.abs().max(1.0)).collect();
    let f0 = eval(&f, x, &base)?;
    let mut hess = DMatrix::zeros(n, n);
    let mut v = base.clone();
    for i in 0..n {
        v[i] = base[i] + h[i];
        let up = eval(&f, x, &v)?;
        v[i] = base[i] - h[i];
        let down = eval(&f, x, &v)?;
        v[i] = base[i];
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                v[i] = base[i] + si * h[i];
                v[j] = base[j] + sj * h[j];
                let r = eval(&f, x, &v);
                v[i] = base[i];
                v[j] = base[j];
                r
            };
            let pp = corner(1.0, 1.0)?;
            let pm = corner(1.0, -1.0)?;
            let mp = corner(-1.0, 1.0)?;
            let mm = corner(-1.0, -1.0)?;
            let hij = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = hij;
            hess[(j, i)] = hij;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_square() {
        let g = numeric_gradient(|p| p.values()[0].powi(2), &Params::new("x", vec![3.0])).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn hessian_of_linear_is_zero() {
        let x = Params::new("x", vec![1.0, -2.0]);
        let h = numeric_hessian(|p| 3.0 * p.values()[0] - p.values()[1] + 7.0, &x).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn hessian_of_quadratic_form() {
        let x = Params::new("x", vec![0.5, 0.25]);
        let h = numeric_hessian(
            |p| {
                let (a, b) = (p.values()[0], p.values()[1]);
                -a * a - 3.0 * a * b - 2.0 * b * b
            },
            &x,
        )
        .unwrap();
        assert!((h[(0, 0)] + 2.0).abs() < 1e-5);
        assert!((h[(0, 1)] + 3.0).abs() < 1e-5);
        assert!((h[(1, 1)] + 4.0).abs() < 1e-5);
    }

    #[test]
    fn non_finite_stencil_point_is_reported() {
        let r = numeric_gradient(|p| p.values()[0].ln(), &Params::new("x", vec![0.0]));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
