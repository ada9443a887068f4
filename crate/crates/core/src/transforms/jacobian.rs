use std::sync::Arc;

use crate::data::DataDim;
use crate::error::{Error, Result};
use crate::model::{DataKind, FittedModel, Model};
use crate::transforms::{record, TransformData};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const PROBES: [f64; 7] = [0.5, 1.0, 1.5, 2.0, 3.0, -1.0, -2.5];
const INVERSE_TOL: f64 = 1e-8;

/// An invertible scalar map applied to every coordinate of a row.
/// `log_jac(y)` is `ln |d f⁻¹/dy|` at `y`; when absent it is computed by
/// central differences of the inverse.
#[derive(Clone)]
pub struct Bijection {
    pub name: String,
    pub f: ScalarFn,
    pub inv: ScalarFn,
    pub log_jac: Option<ScalarFn>,
    /// Monotone direction, when known; needed for the CDF.
    pub increasing: Option<bool>,
}

impl Bijection {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            inv: Arc::new(inv),
            log_jac: None,
            increasing: None,
        }
    }

    pub fn with_log_jac(mut self, j: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.log_jac = Some(Arc::new(j));
        self
    }

    pub fn monotone(mut self, increasing: bool) -> Self {
        self.increasing = Some(increasing);
        self
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x, |y| y).with_log_jac(|_| 0.0).monotone(true)
    }

    pub fn cube() -> Self {
        Self::new("cube", |x| x * x * x, f64::cbrt)
            .with_log_jac(|y| -(3f64.ln()) - 2.0 / 3.0 * y.abs().ln())
            .monotone(true)
    }

    /// Square root on the nonnegative half line.
    pub fn sqrt() -> Self {
        Self::new("sqrt", f64::sqrt, |y| if y >= 0.0 { y * y } else { f64::NAN })
            .with_log_jac(|y| (2.0 * y).ln())
            .monotone(true)
    }

    pub fn reciprocal() -> Self {
        Self::new("reciprocal", |x| 1.0 / x, |y| 1.0 / y).with_log_jac(|y| -2.0 * y.abs().ln())
    }

    pub fn log() -> Self {
        Self::new("log", f64::ln, f64::exp).with_log_jac(|y| y).monotone(true)
    }

    pub fn exp() -> Self {
        Self::new("exp", f64::exp, f64::ln).with_log_jac(|y| -y.ln()).monotone(true)
    }

    /// `x ↦ a x + b`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(format!("affine({a}, {b})"), move |x| a * x + b, move |y| (y - b) / a)
            .with_log_jac(move |_| -a.abs().ln())
            .monotone(a > 0.0)
    }

    /// `outer ∘ inner`: applies `inner` first.
    pub fn compose(outer: &Bijection, inner: &Bijection) -> Self {
        let (of, gf) = (outer.f.clone(), inner.f.clone());
        let (oi, gi) = (outer.inv.clone(), inner.inv.clone());
        let (oi2, ol, gl) = (outer.inv.clone(), outer.clone(), inner.clone());
        let increasing = match (outer.increasing, inner.increasing) {
            (Some(a), Some(b)) => Some(a == b),
            _ => None,
        };
        Self {
            name: format!("{}∘{}", outer.name, inner.name),
            f: Arc::new(move |x| of(gf(x))),
            inv: Arc::new(move |y| gi(oi(y))),
            log_jac: Some(Arc::new(move |y| ol.log_jac_at(y) + gl.log_jac_at(oi2(y)))),
            increasing,
        }
    }

    pub fn log_jac_at(&self, y: f64) -> f64 {
        match &self.log_jac {
            Some(j) => j(y),
            None => {
                let h = f64::EPSILON.cbrt() * y.abs().max(1.0);
                let d = ((self.inv)(y + h) - (self.inv)(y - h)) / (2.0 * h);
                d.abs().ln()
            }
        }
    }

    fn check_inverse(&self) -> Result<()> {
        for x in PROBES {
            let y = (self.f)(x);
            if !y.is_finite() {
                continue;
            }
            let back = (self.inv)(y);
            let dev = (back - x).abs();
            if !(dev <= INVERSE_TOL * x.abs().max(1.0)) {
                return Err(Error::InconsistentInverse { point: vec![x], deviation: dev });
            }
        }
        Ok(())
    }
}

/// Pushes a model through an elementwise bijection. The likelihood picks
/// up the log-Jacobian of the inverse; draws are mapped forward; the
/// estimator runs on inverse-mapped data.
pub fn jacobian(m: &Model, bij: Bijection) -> Result<Model> {
    bij.check_inverse()?;
    if m.data_dim() == DataDim::Variable {
        return Err(Error::space(m.label().to_string(), "jacobian needs fixed-dimension data"));
    }
    let bij = Arc::new(bij);
    let report = m.resolve();
    let mut b = Model::builder(
        format!("jacobian({}, {})", m.label(), bij.name),
        m.data_dim(),
        m.param_shape().clone(),
    )
    .inherit(m)
    .data_kind(DataKind::Continuous);

    if report.log_likelihood.is_resolvable() {
        let (base, bij) = (m.clone(), bij.clone());
        b = b.log_likelihood_row(move |y, p| {
            let x: Vec<f64> = y.iter().map(|&v| (bij.inv)(v)).collect();
            if x.iter().any(|v| v.is_nan()) {
                return Ok(f64::NEG_INFINITY);
            }
            let ll = base.log_likelihood_row(&x, p)?;
            if ll == f64::NEG_INFINITY {
                return Ok(ll);
            }
            Ok(ll + y.iter().map(|&v| bij.log_jac_at(v)).sum::<f64>())
        });
    }
    if report.draw.is_resolvable() {
        let (base, bij) = (m.clone(), bij.clone());
        b = b.sampler(move |p, s| Ok(base.draw(p, s)?.into_iter().map(|v| (bij.f)(v)).collect()));
    }
    if report.estimate.is_resolvable() {
        let (base, bij) = (m.clone(), bij.clone());
        b = b.estimator(move |me, d| {
            let f = base.estimate(&d.map_rows(|r| r.iter().map(|&v| (bij.inv)(v)).collect()))?;
            Ok(FittedModel {
                model: me.clone(),
                params: f.params,
                diagnostics: f.diagnostics,
            })
        });
    }
    if let (Some(up), DataDim::Fixed(1), true) =
        (bij.increasing, m.data_dim(), report.cdf.is_resolvable())
    {
        let (base, bij) = (m.clone(), bij.clone());
        b = b.cdf(move |y, p| {
            let x = (bij.inv)(y[0]);
            if x.is_nan() {
                return Ok(if up { 0.0 } else { 1.0 });
            }
            let c = base.cdf(&[x], p)?;
            Ok(if up { c } else { 1.0 - c })
        });
    }
    if let Some(c) = m.constraint_fn() {
        b = b.constraint(c);
    }
    {
        let (base, bij) = (m.clone(), bij.clone());
        b = b.start(move |d| base.start_params(&d.map_rows(|r| r.iter().map(|&v| (bij.inv)(v)).collect())));
    }
    Ok(b
        .setting(record(
            "jacobian",
            &[m],
            TransformData::Jacobian {
                bijection: (*bij).clone(),
            },
        ))
        .delegated("jacobian")
        .build())
}
