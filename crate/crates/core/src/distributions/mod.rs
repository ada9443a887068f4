//! Built-in models with closed-form elements.

pub(crate) mod continuous;
pub(crate) mod discrete;
mod mvn;
mod ols;
pub mod pmf;

pub use continuous::{beta_model, exponential_model, normal_model, uniform_model, weibull_model};
pub use discrete::poisson_model;
pub use mvn::{mvn_model, mvn_params};
pub use ols::ols_model;
pub use pmf::{pmf_from, pmf_model, Pmf};


use crate::error::{Error, Result};
use crate::model::{Model, ResolveReport};

/// Looks up a parameter-free constructor by name.
pub fn builtin(name: &str) -> Result<Model> {
    Ok(match name {
        "normal" => normal_model(),
        "exponential" => exponential_model(),
        "poisson" => poisson_model(),
        "beta" => beta_model(),
        "uniform" => uniform_model(),
        "weibull" => weibull_model(),
        "multivariate_normal" | "mvn" => mvn_model(2),
        _ => return Err(Error::UnknownName(name.to_string())),
    })
}

/// Summary of one catalog model.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: Vec<String>,
    pub elements: ResolveReport,
    pub constrained: bool,
    pub support: &'static str,
}

pub fn catalog() -> Vec<CatalogEntry> {
    [
        ("normal", "R"),
        ("exponential", "(0, inf)"),
        ("poisson", "{0, 1, 2, ...}"),
        ("beta", "(0, 1)"),
        ("uniform", "[a, b]"),
        ("weibull", "(0, inf)"),
        ("multivariate_normal", "R^d"),
    ]
    .into_iter()
    .map(|(name, support)| {
        let m = builtin(name).expect("catalog names are registered");
        CatalogEntry {
            name,
            params: m.param_shape().labels(),
            elements: m.resolve(),
            constrained: m.has_constraint(),
            support,
        }
    })
    .collect()
}
