//! Turns a parsed expression into a model.

use std::path::{Path, PathBuf};

use crate::cli::parse::{ModelExpr, Value};
use crate::data::DataSet;
use crate::distributions::{self, ols_model, pmf_model};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::Params;
use crate::sims::{demand_model, network_sim_model, search_model, DemandConfig, NetworkSimConfig, SearchConfig};
use crate::transforms::{
    cross, d_compose, dp_compose, fix_named, jacobian, mix, mix_cdf, pd_compose, swap, truncate, Bijection, NSeq,
    Region, DCOMPOSE_DRAWS,
};

/// Names understood by [`eval_model_expr`], each with an expression that
/// uses it.
pub const REGISTRY: &[(&str, &str)] = &[
    ("normal", "normal"),
    ("exponential", "exponential"),
    ("poisson", "poisson"),
    ("beta", "beta"),
    ("weibull", "weibull"),
    ("uniform", "uniform"),
    ("mvn", "mvn(d=2)"),
    ("pmf", "pmf(file=\"data.csv\")"),
    ("ols", "ols(file=\"data.csv\")"),
    ("point", "point(at=0)"),
    ("ncut", "ncut"),
    ("network_sim", "network_sim(n=10, sigma_free=1)"),
    ("demand_sim", "demand_sim(n=1000, price=0.5)"),
    ("search_sim", "search_sim(w=20, h=20, pairs=10)"),
    ("fix", "fix(normal, sigma=1)"),
    ("cross", "cross(normal, exponential)"),
    ("mix", "mix(normal, normal, w=0.3)"),
    ("mixcdf", "mixcdf(truncate(normal, min=0), point(at=0))"),
    ("truncate", "truncate(normal, min=0, max=inf)"),
    ("jacobian", "jacobian(exponential, f=reciprocal)"),
    ("swap", "swap(normal)"),
    ("dcompose", "dcompose(network_sim, exponential, draws=500, seed=0)"),
    ("dpcompose", "dpcompose(normal, fix(normal, sigma=1), mu=0, sigma=1)"),
    ("pdcompose", "pdcompose(normal, fix(normal, sigma=1))"),
];

/// Where relative `file=` paths are resolved and which file backs `pmf`
/// and `ols` when no `file=` is given.
#[derive(Clone, Debug, Default)]
pub struct EvalContext {
    pub data: Option<PathBuf>,
    pub base_dir: Option<PathBuf>,
}

struct Call<'a> {
    name: &'a str,
    args: &'a [ModelExpr],
    kwargs: &'a [(String, Value)],
}

impl Call<'_> {
    fn bad(&self, keyword: &str, reason: impl Into<String>) -> Error {
        Error::BadKeyword {
            function: self.name.to_string(),
            keyword: keyword.to_string(),
            reason: reason.into(),
        }
    }

    fn allow(&self, names: &[&str]) -> Result<()> {
        match self.kwargs.iter().find(|(k, _)| !names.contains(&k.as_str())) {
            Some((k, _)) => Err(self.bad(k, format!("expected one of {names:?}"))),
            None => Ok(()),
        }
    }

    fn arity(&self, min: usize, max: usize) -> Result<()> {
        let n = self.args.len();
        if n < min || n > max {
            let want = if min == max {
                format!("{min}")
            } else if max == usize::MAX {
                format!("at least {min}")
            } else {
                format!("{min} to {max}")
            };
            return Err(Error::invalid(format!(
                "{} takes {want} model argument(s), got {n}",
                self.name
            )));
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.kwargs.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Number(x)) => Ok(Some(*x)),
            Some(Value::Ident(w)) if w == "inf" => Ok(Some(f64::INFINITY)),
            Some(Value::Ident(w)) if w == "ninf" => Ok(Some(f64::NEG_INFINITY)),
            Some(_) => Err(self.bad(key, "expected a number")),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        match self.number(key)? {
            None => Ok(default),
            Some(x) if x >= 0.0 && x.fract() == 0.0 && x.is_finite() => Ok(x as usize),
            Some(_) => Err(self.bad(key, "expected a nonnegative integer")),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.number(key)? {
            None => Ok(false),
            Some(x) if x == 0.0 || x == 1.0 => Ok(x == 1.0),
            Some(_) => Err(self.bad(key, "expected 0 or 1")),
        }
    }

    fn numbers(&self, key: &str) -> Result<Vec<f64>> {
        match self.get(key) {
            Some(Value::Number(x)) => Ok(vec![*x]),
            Some(Value::List(xs)) => Ok(xs.clone()),
            _ => Err(self.bad(key, "expected a number or a list of numbers")),
        }
    }

    fn word(&self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Str(s) | Value::Ident(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.bad(key, "expected a name or a string")),
        }
    }
}

fn no_call(name: &str) -> Call<'_> {
    Call {
        name,
        args: &[],
        kwargs: &[],
    }
}

fn load_data(call: &Call, ctx: &EvalContext) -> Result<DataSet> {
    let path = match call.word("file")? {
        Some(f) => {
            let p = Path::new(&f);
            match (&ctx.base_dir, p.is_relative()) {
                (Some(dir), true) => dir.join(p),
                _ => p.to_path_buf(),
            }
        }
        None => ctx
            .data
            .clone()
            .ok_or_else(|| call.bad("file", "no file given and no --data set"))?,
    };
    DataSet::read_csv_path(path)
}

fn bijection(call: &Call) -> Result<Bijection> {
    let f = call.word("f")?.ok_or_else(|| call.bad("f", "missing"))?;
    Ok(match f.as_str() {
        "cube" => Bijection::cube(),
        "sqrt" => Bijection::sqrt(),
        "reciprocal" => Bijection::reciprocal(),
        "log" => Bijection::log(),
        "exp" => Bijection::exp(),
        other => return Err(call.bad("f", format!("unknown function `{other}`"))),
    })
}

fn ncut() -> Result<Model> {
    let t = truncate(&distributions::normal_model(), Region::interval(0.0, f64::INFINITY))?;
    mix_cdf(&t, &pmf_model(&DataSet::from_column(&[0.0]))?)
}

/// Pins every keyword naming a parameter block of `m` and returns the
/// resulting parameter vector.
fn block_values(call: &Call, m: &Model, skip: &[&str]) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    for (k, _) in call.kwargs {
        if skip.contains(&k.as_str()) {
            continue;
        }
        if m.param_shape().block(k).is_none() {
            return Err(call.bad(
                k,
                format!("{} has parameter blocks {:?}", m.label(), m.param_shape().labels()),
            ));
        }
        out.push((k.clone(), call.numbers(k)?));
    }
    Ok(out)
}

/// Builds the model an expression describes.
pub fn eval_model_expr(e: &ModelExpr, ctx: &EvalContext) -> Result<Model> {
    let call = match e {
        ModelExpr::Name(n) => no_call(n),
        ModelExpr::Call { name, args, kwargs } => Call { name, args, kwargs },
    };
    let sub = |i: usize| eval_model_expr(&call.args[i], ctx);
    let leaf = |call: &Call| call.arity(0, 0);
    match call.name {
        "normal" | "exponential" | "poisson" | "beta" | "weibull" | "uniform" => {
            leaf(&call)?;
            call.allow(&[])?;
            distributions::builtin(call.name)
        }
        "mvn" | "multivariate_normal" => {
            leaf(&call)?;
            call.allow(&["d"])?;
            let d = call.count("d", 2)?;
            if d == 0 {
                return Err(call.bad("d", "dimension must be positive"));
            }
            Ok(distributions::mvn_model(d))
        }
        "pmf" => {
            leaf(&call)?;
            call.allow(&["file"])?;
            pmf_model(&load_data(&call, ctx)?)
        }
        "ols" => {
            leaf(&call)?;
            call.allow(&["file"])?;
            let d = load_data(&call, ctx)?;
            match d.dim() {
                Some(k) if k >= 2 => Ok(ols_model(k - 1)),
                _ => Err(Error::invalid("ols data needs a response column and at least one regressor")),
            }
        }
        "point" => {
            leaf(&call)?;
            call.allow(&["at"])?;
            let at = match call.get("at") {
                None => vec![0.0],
                Some(_) => call.numbers("at")?,
            };
            pmf_model(&DataSet::new(vec![at])?)
        }
        "ncut" => {
            leaf(&call)?;
            call.allow(&[])?;
            ncut()
        }
        "network_sim" => {
            leaf(&call)?;
            call.allow(&["n", "sigma", "sigma_free"])?;
            let base = NetworkSimConfig::default();
            let cfg = NetworkSimConfig {
                n_agents: call.count("n", base.n_agents)?,
                sigma: call.number("sigma")?.unwrap_or(base.sigma),
            };
            network_sim_model(cfg, call.flag("sigma_free")?)
        }
        "demand_sim" => {
            leaf(&call)?;
            call.allow(&["n", "price"])?;
            let base = DemandConfig::default();
            demand_model(DemandConfig {
                n_agents: call.count("n", base.n_agents)?,
                price: call.number("price")?.unwrap_or(base.price),
            })
        }
        "search_sim" => {
            leaf(&call)?;
            call.allow(&["w", "h", "pairs"])?;
            search_model(SearchConfig {
                grid_w: call.count("w", 20)?,
                grid_h: call.count("h", 20)?,
                n_pairs: call.count("pairs", 10)?,
            })
        }
        "fix" => {
            call.arity(1, 1)?;
            let m = sub(0)?;
            let blocks = block_values(&call, &m, &[])?;
            if blocks.is_empty() {
                return Err(Error::invalid("fix needs at least one parameter keyword"));
            }
            let refs: Vec<(&str, &[f64])> = blocks.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
            fix_named(&m, &refs)
        }
        "cross" => {
            call.arity(2, usize::MAX)?;
            call.allow(&[])?;
            let ms = (0..call.args.len()).map(sub).collect::<Result<Vec<_>>>()?;
            cross(&ms)
        }
        "mix" => {
            call.arity(1, usize::MAX)?;
            call.allow(&["w"])?;
            let ms = (0..call.args.len()).map(sub).collect::<Result<Vec<_>>>()?;
            let k = ms.len();
            let weights = match call.get("w") {
                None => None,
                Some(Value::Number(w)) if k == 1 => Some(vec![*w]),
                Some(Value::Number(w)) => Some(
                    std::iter::once(*w)
                        .chain(std::iter::repeat_n((1.0 - w) / (k - 1) as f64, k - 1))
                        .collect(),
                ),
                Some(Value::List(ws)) => Some(ws.clone()),
                Some(_) => return Err(call.bad("w", "expected a weight or a list of weights")),
            };
            mix(&ms, weights.as_deref())
        }
        "mixcdf" => {
            call.arity(2, 2)?;
            call.allow(&[])?;
            mix_cdf(&sub(0)?, &sub(1)?)
        }
        "truncate" => {
            call.arity(1, 1)?;
            call.allow(&["min", "max"])?;
            let min = call.number("min")?.unwrap_or(f64::NEG_INFINITY);
            let max = call.number("max")?.unwrap_or(f64::INFINITY);
            if !(min <= max) {
                return Err(call.bad("min", "min must not exceed max"));
            }
            truncate(&sub(0)?, Region::interval(min, max))
        }
        "jacobian" => {
            call.arity(1, 1)?;
            call.allow(&["f"])?;
            jacobian(&sub(0)?, bijection(&call)?)
        }
        "swap" => {
            call.arity(1, 1)?;
            call.allow(&[])?;
            swap(&sub(0)?)
        }
        "dcompose" => {
            call.arity(2, 2)?;
            call.allow(&["draws", "seed", "live"])?;
            let draws = call.count("draws", DCOMPOSE_DRAWS)?;
            let seed = call.count("seed", 0)? as u64;
            let nseq = if call.flag("live")? {
                NSeq::Live(seed)
            } else {
                NSeq::Pinned(seed)
            };
            d_compose(&sub(0)?, &sub(1)?, nseq, draws)
        }
        "dpcompose" => {
            call.arity(2, 2)?;
            let (prior, like) = (sub(0)?, sub(1)?);
            let blocks = block_values(&call, &prior, &[])?;
            let rho = if blocks.is_empty() {
                None
            } else {
                let mut r = prior.param_shape().clone();
                for (k, v) in &blocks {
                    r.set_block(k, v)?;
                }
                Some(r)
            };
            dp_compose(&prior, &like, rho.as_ref())
        }
        "pdcompose" => {
            call.arity(2, 2)?;
            call.allow(&[])?;
            pd_compose(&sub(0)?, &sub(1)?)
        }
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// Parameters at which to draw from an evaluated model: its defaults.
pub fn default_params(m: &Model) -> Params {
    m.param_shape().clone()
}
