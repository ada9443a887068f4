use std::fmt;
use std::sync::Arc;

use crate::data::DataDim;
use crate::error::{Error, Result};
use crate::model::{DataKind, Model, ParamCache};
use crate::params::Params;
use crate::stream::RandomStream;
use crate::transforms::{record, TransformData};

const MAX_REJECTIONS: usize = 1000;

/// Membership test of a predicate region.
pub type RegionTest = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Truncation region. Intervals are closed and apply to every coordinate;
/// infinite ends are allowed.
#[derive(Clone)]
pub enum Region {
    Interval { min: f64, max: f64 },
    Predicate {
        label: String,
        test: Arc<RegionTest>,
    },
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Interval { min, max } => write!(f, "[{min}, {max}]"),
            Region::Predicate { label, .. } => write!(f, "{{{label}}}"),
        }
    }
}

impl Region {
    pub fn interval(min: f64, max: f64) -> Self {
        Region::Interval { min, max }
    }

    pub fn predicate(label: impl Into<String>, test: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Region::Predicate {
            label: label.into(),
            test: Arc::new(test),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Interval { min, max } => x.iter().all(|v| v >= min && v <= max),
            Region::Predicate { test, .. } => test(x),
        }
    }
}

/// Probability the base model at `p` assigns to the region. One-dimensional
/// intervals use the CDF; everything else counts seeded draws.
pub fn region_mass(base: &Model, region: &Region, p: &Params) -> Result<f64> {
    let mass = match region {
        Region::Interval { min, max }
            if base.data_dim() == DataDim::Fixed(1) && base.resolve().cdf.is_resolvable() =>
        {
            let upper = if *max == f64::INFINITY { 1.0 } else { base.cdf(&[*max], p)? };
            upper - below(base, *min, p)?
        }
        _ => {
            let n = base.settings().trunc_mc().normalizer_draws;
            let mut s = RandomStream::new(base.settings().fill().seed);
            let draws = base.draw_many(p, n, &mut s)?;
            draws.rows().iter().filter(|r| region.contains(r)).count() as f64 / n as f64
        }
    };
    if !(mass > 0.0) {
        return Err(Error::RegionMassTooSmall { rejections: 0 });
    }
    Ok(mass.min(1.0))
}

/// Mass strictly below `min`.
fn below(base: &Model, min: f64, p: &Params) -> Result<f64> {
    if min == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    match base.data_kind() {
        DataKind::Discrete => base.cdf(&[min.ceil() - 1.0], p),
        DataKind::Continuous => base.cdf(&[min], p),
    }
}

/// Restricts a model to a region of its data space, renormalizing the
/// likelihood by the region's mass. Sampling rejects draws outside the
/// region; estimation is maximum likelihood on the renormalized
/// likelihood.
pub fn truncate(m: &Model, region: Region) -> Result<Model> {
    if matches!(region, Region::Interval { min, max } if !(min <= max)) {
        return Err(Error::invalid("truncation interval must have min <= max"));
    }
    if m.data_dim() == DataDim::Variable {
        return Err(Error::space(m.label().to_string(), "truncation needs fixed-dimension data"));
    }
    let region = Arc::new(region);
    let cache: Arc<ParamCache<f64>> = Arc::new(ParamCache::new(16));
    let mass = {
        let (base, region, cache) = (m.clone(), region.clone(), cache.clone());
        Arc::new(move |p: &Params| cache.get_or_try_insert(p.key(), || region_mass(&base, &region, p)))
    };
    let report = m.resolve();
    let mut b = Model::builder(format!("truncate({}, {:?})", m.label(), region), m.data_dim(), m.param_shape().clone())
        .inherit(m);
    if let Some(g) = m.settings().get("trunc_mc") {
        b = b.setting(g.clone());
    }

    if report.log_likelihood.is_resolvable() {
        let (base, region, mass) = (m.clone(), region.clone(), mass.clone());
        b = b.log_likelihood_row(move |x, p| {
            if !region.contains(x) {
                return Ok(f64::NEG_INFINITY);
            }
            let ll = base.log_likelihood_row(x, p)?;
            if ll == f64::NEG_INFINITY {
                return Ok(ll);
            }
            Ok(ll - mass(p)?.ln())
        });
    }
    if report.draw.is_resolvable() {
        let (base, region) = (m.clone(), region.clone());
        b = b.sampler(move |p, s| {
            for _ in 0..MAX_REJECTIONS {
                let x = base.draw(p, s)?;
                if region.contains(&x) {
                    return Ok(x);
                }
            }
            Err(Error::RegionMassTooSmall {
                rejections: MAX_REJECTIONS,
            })
        });
    }
    if let (Region::Interval { min, max }, DataDim::Fixed(1), true) =
        (&*region, m.data_dim(), report.cdf.is_resolvable())
    {
        let (base, mass, min, max) = (m.clone(), mass.clone(), *min, *max);
        b = b.cdf(move |x, p| {
            if x[0] < min {
                return Ok(0.0);
            }
            if x[0] >= max {
                return Ok(1.0);
            }
            let v = (base.cdf(x, p)? - below(&base, min, p)?) / mass(p)?;
            Ok(v.clamp(0.0, 1.0))
        });
    }
    if let Some(c) = m.constraint_fn() {
        b = b.constraint(c);
    }
    let base = m.clone();
    b = b.start(move |d| base.start_params(d));
    let record_region = (*region).clone();
    Ok(b
        .setting(record("truncate", &[m], TransformData::Truncate { region: record_region }))
        .delegated("truncate")
        .build())
}
