//! The named example pipelines.

use std::fs;
use std::path::PathBuf;

use crate::cli::eval::{default_params, eval_model_expr, EvalContext};
use crate::cli::output::{write_csv, write_gnuplot, Cell, Table};
use crate::cli::parse::parse_model_expr;
use crate::data::DataSet;
use crate::distributions::{beta_model, exponential_model, normal_model, Pmf};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::Params;
use crate::settings::{FillSettings, McmcSettings, SettingsGroup};
use crate::sims::{
    demand_model, fit_weibull, fuzz_weibull_posterior, network_sim_model, pooled_times, DemandConfig,
    NetworkSimConfig, SearchConfig, SettingPrior, FUZZ_RUNS,
};
use crate::stream::RandomStream;
use crate::transforms::{d_compose, fix_named, posterior, truncate, NSeq, Region, DCOMPOSE_DRAWS};

pub const EXAMPLES: &[&str] = &[
    "roundtrip",
    "network-cdf",
    "sigma-fit",
    "poisson-update",
    "demand",
    "search",
    "weibull-fuzz",
];

pub const POISSON_SOURCE: &str = "mix(fix(poisson, lambda=2.8), fix(poisson, lambda=2.0), fix(poisson, lambda=1.3))";
pub const POISSON_UPDATE: &str = "dpcompose(truncate(fix(normal, mu=2, sigma=1), min=0), poisson)";

#[derive(Clone, Debug)]
pub struct ExampleOptions {
    pub seed: u64,
    /// Overrides the example's main sample size.
    pub draws: Option<usize>,
    pub out: PathBuf,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            draws: None,
            out: PathBuf::from("out"),
        }
    }
}

/// One tolerance check: `value` must lie in `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
        }
    }

    pub fn pass(&self) -> bool {
        self.value >= self.lo && self.value <= self.hi
    }
}

#[derive(Clone, Debug)]
pub struct ExampleReport {
    pub name: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl ExampleReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            tables: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    /// The checks as a table.
    pub fn check_table(&self) -> Table {
        let mut t = Table::new("checks", &["check", "value", "low", "high", "result"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone().into(),
                c.value.into(),
                c.lo.into(),
                c.hi.into(),
                if c.pass() { "pass" } else { "FAIL" }.into(),
            ]);
        }
        t
    }
}

/// Runs a named example, writing its data files under `opts.out`.
pub fn run_example(name: &str, opts: &ExampleOptions) -> Result<ExampleReport> {
    if !EXAMPLES.contains(&name) {
        return Err(Error::UnknownName(name.to_string()));
    }
    fs::create_dir_all(&opts.out)?;
    let mut r = ExampleReport::new(name);
    match name {
        "roundtrip" => roundtrip(opts, &mut r)?,
        "network-cdf" => network_cdf(opts, &mut r)?,
        "sigma-fit" => sigma_fit(opts, &mut r)?,
        "poisson-update" => poisson_update(opts, &mut r)?,
        "demand" => demand(opts, &mut r)?,
        "search" => search(opts, &mut r)?,
        "weibull-fuzz" => weibull_fuzz(opts, &mut r)?,
        _ => unreachable!("checked above"),
    }
    Ok(r)
}

fn np(mu: f64, sigma: f64) -> Params {
    Params::new("mu", vec![mu]).with_block("sigma", vec![sigma])
}

/// Round trips: draw, estimate, compare with the truth.
pub fn roundtrip_cases() -> Result<Vec<(String, Model, Params, f64)>> {
    let normal = normal_model();
    let beta = beta_model();
    let bp = Params::new("alpha", vec![0.7]).with_block("beta", vec![1.7]);
    Ok(vec![
        ("normal".into(), normal.clone(), np(1.0, 1.0), 0.05),
        (
            "truncated normal".into(),
            truncate(&normal, Region::interval(0.0, f64::INFINITY))?,
            np(1.0, 1.0),
            0.05,
        ),
        ("beta".into(), beta.clone(), bp.clone(), 0.08),
        (
            "truncated beta".into(),
            truncate(&beta, Region::interval(0.2, f64::INFINITY))?,
            bp,
            0.08,
        ),
    ])
}

fn roundtrip(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let n = opts.draws.unwrap_or(10_000);
    let mut s = RandomStream::new(opts.seed);
    let mut t = Table::new(format!("round trips, {n} draws each"), &["model", "parameter", "true", "estimate"]);
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (i, (label, m, truth, tol)) in roundtrip_cases()?.into_iter().enumerate() {
        let d = m.draw_many(&truth, n, &mut s)?;
        let est = m.estimate(&d)?;
        let mut points = Vec::new();
        for ((name, t_v), e_v) in truth.labels().into_iter().zip(truth.values()).zip(est.params.values()) {
            t.push(vec![label.clone().into(), name.clone().into(), (*t_v).into(), (*e_v).into()]);
            r.checks.push(Check::new(format!("{label} {name}"), *e_v, t_v - tol, t_v + tol));
            rows.push(vec![i as f64, *t_v, *e_v]);
            points.push(vec![*t_v, *e_v]);
        }
        series.push((label, points));
    }
    r.tables.push(t);
    r.files.push(write_csv(&opts.out.join("roundtrip.csv"), &["model", "true", "estimate"], &rows)?);
    r.files.push(write_gnuplot(&opts.out.join("roundtrip.dat"), &series)?);
    Ok(())
}

/// The query point of the network CDF example: at most 4 links for the
/// best-connected agent, at most 9 for everyone else.
pub fn network_query(n: usize) -> Vec<f64> {
    let mut q = vec![9.0; n];
    q[0] = 4.0;
    q
}

fn network_cdf(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let runs = opts.draws.unwrap_or(10_000);
    let m = network_sim_model(NetworkSimConfig::default(), false)?.with_setting(SettingsGroup::Fill(FillSettings {
        draws: runs,
        seed: opts.seed,
    }))?;
    let q = network_query(10);
    let c = m.cdf(&q, &Params::empty())?;
    let mut t = Table::new(format!("network simulation, {runs} runs"), &["query", "cdf"]);
    t.push(vec![format!("{q:?}").into(), c.into()]);
    r.tables.push(t);
    r.checks.push(Check::new("orthant cdf", c, 0.0533 - 0.01, 0.0533 + 0.01));
    let draws = m.empirical_draws(&Params::empty())?;
    r.files.push(write_csv(&opts.out.join("network_runs.csv"), &[], &draws)?);
    // Rank against link count, one series per run, for the first runs.
    let series: Vec<(String, Vec<Vec<f64>>)> = draws
        .iter()
        .take(100)
        .enumerate()
        .map(|(i, row)| {
            (
                format!("run {i}"),
                row.iter().enumerate().map(|(k, v)| vec![(k + 1) as f64, *v]).collect(),
            )
        })
        .collect();
    r.files.push(write_gnuplot(&opts.out.join("network.dat"), &series)?);
    Ok(())
}

/// The composed model whose estimate is the spread closest to an
/// Exponential with mean one: the σ-free network simulation feeding an
/// Exponential likelihood with λ pinned at 1, under common random numbers
/// seeded by `seed`.
pub fn sigma_fit_model(seed: u64, draws: usize) -> Result<Model> {
    let sim = network_sim_model(
        NetworkSimConfig {
            n_agents: 10,
            sigma: 0.1,
        },
        true,
    )?;
    let composed = d_compose(&sim, &exponential_model(), NSeq::Pinned(seed), draws)?;
    fix_named(&composed, &[("lambda", &[1.0])])
}

fn sigma_fit(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let draws = opts.draws.unwrap_or(DCOMPOSE_DRAWS);
    let m = sigma_fit_model(opts.seed, draws)?;
    let unit = DataSet::unit();
    let fit = m.estimate(&unit)?;
    let sigma = fit.params.values()[0];
    let mut t = Table::new(format!("sigma fit, {draws} simulated networks"), &["sigma_opt", "log-likelihood"]);
    t.push(vec![sigma.into(), m.log_likelihood(&unit, &fit.params)?.into()]);
    r.tables.push(t);
    r.checks.push(Check::new("sigma_opt", sigma, 0.41, 0.61));
    let mut profile = Vec::new();
    for i in 1..=100 {
        let s = i as f64 * 0.01;
        let ll = m.log_likelihood(&unit, &m.param_shape().with_values(&[s])?)?;
        if ll.is_finite() {
            profile.push(vec![s, ll]);
        }
    }
    r.files.push(write_csv(&opts.out.join("sigma_profile.csv"), &["sigma", "loglik"], &profile)?);
    r.files.push(write_gnuplot(&opts.out.join("sigma_profile.dat"), &[("log-likelihood".into(), profile)])?);
    Ok(())
}

/// Mean and spread of the Normal fitted to the posterior of the Poisson
/// rate, with the posterior draws behind it.
pub fn poisson_update_fit(seed: u64, n_data: usize, chain: usize) -> Result<(Params, Vec<Vec<f64>>)> {
    let ctx = EvalContext::default();
    let source = eval_model_expr(&parse_model_expr(POISSON_SOURCE)?, &ctx)?;
    let update = eval_model_expr(&parse_model_expr(POISSON_UPDATE)?, &ctx)?;
    let mut s = RandomStream::new(seed);
    let data = source.draw_many(&default_params(&source), n_data, &mut s)?;
    let update = update.with_setting(SettingsGroup::Mcmc(McmcSettings {
        step_scale: 0.05,
        ..McmcSettings::default()
    }))?;
    let post = posterior(&update, &data, chain, &mut s, None)?;
    let draws: Vec<Vec<f64>> = match &post.chain {
        Some(c) => c.samples.clone(),
        None => post.model.draw_many(&post.params, chain, &mut s)?.rows().to_vec(),
    };
    let fit = normal_model().estimate(&DataSet::new(draws.clone())?)?;
    Ok((fit.params, draws))
}

fn poisson_update(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let chain = opts.draws.unwrap_or(10_000);
    let (fit, draws) = poisson_update_fit(opts.seed, 1000, chain)?;
    let (mu, sigma) = (fit.values()[0], fit.values()[1]);
    let mut t = Table::new("Normal approximation to the posterior", &["mu", "sigma"]);
    t.push(vec![mu.into(), sigma.into()]);
    r.tables.push(t);
    r.checks.push(Check::new("posterior mean", mu, 1.3, 2.8));
    r.files.push(write_csv(&opts.out.join("posterior.csv"), &["lambda"], &draws)?);
    let pmf = Pmf::from_rows(
        draws.iter().map(|d| vec![(d[0] * 50.0).round() / 50.0]).collect(),
        vec![1.0; draws.len()],
    )?;
    let hist = pmf.support().iter().zip(pmf.weights()).map(|(x, w)| vec![x[0], *w]).collect();
    r.files.push(write_gnuplot(&opts.out.join("posterior.dat"), &[("posterior".into(), hist)])?);
    Ok(())
}

fn demand(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let n = opts.draws.unwrap_or(20);
    let m = demand_model(DemandConfig::default())?;
    let truth = m.param_shape().with_values(&[3.0, 0.5])?;
    let d = m.draw_many(&truth, n, &mut RandomStream::new(opts.seed))?;
    let fit = m.estimate(&d)?;
    let mut t = Table::new(format!("demand round trip, {n} observations"), &["parameter", "true", "estimate"]);
    for ((name, tv), ev) in truth.labels().into_iter().zip(truth.values()).zip(fit.params.values()) {
        t.push(vec![name.clone().into(), (*tv).into(), (*ev).into()]);
        r.checks.push(Check::new(name, *ev, tv - 0.2, tv + 0.2));
    }
    r.tables.push(t);
    r.files.push(write_csv(&opts.out.join("demand.csv"), &["Q1", "Q2"], d.rows())?);
    r.files.push(write_gnuplot(&opts.out.join("demand.dat"), &[("mean demand".into(), d.rows().to_vec())])?);
    Ok(())
}

fn search(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let runs = opts.draws.unwrap_or(100);
    let cfg = SearchConfig::square(20, 10);
    let times = pooled_times(&cfg, runs, &mut RandomStream::new(opts.seed))?;
    let (lambda, k) = fit_weibull(&times)?;
    let mut t = Table::new(format!("search model, 20x20 grid, 10 pairs, {runs} runs"), &["lambda", "k"]);
    t.push(vec![lambda.into(), k.into()]);
    r.tables.push(t);
    r.checks.push(Check::new("weibull k", k, 0.0, 1.0 - f64::EPSILON));
    let rows: Vec<Vec<f64>> = times.rows().to_vec();
    r.files.push(write_csv(&opts.out.join("pairing_times.csv"), &["time"], &rows)?);
    let pmf = Pmf::from_dataset(&times)?;
    let hist = pmf.support().iter().zip(pmf.weights()).map(|(x, w)| vec![x[0], *w]).collect();
    r.files.push(write_gnuplot(&opts.out.join("pairing_times.dat"), &[("pairing times".into(), hist)])?);
    Ok(())
}

/// Priors on the grid side and the number of pairs used by the fuzzing
/// example.
pub fn fuzz_priors() -> (SettingPrior, SettingPrior) {
    (
        SettingPrior::new(normal_model(), np(20.0, 3.0)),
        SettingPrior::new(normal_model(), np(10.0, 2.0)),
    )
}

fn weibull_fuzz(opts: &ExampleOptions, r: &mut ExampleReport) -> Result<()> {
    let reps = opts.draws.unwrap_or(100);
    let (side, pairs) = fuzz_priors();
    let pmf = fuzz_weibull_posterior(&side, &pairs, reps, FUZZ_RUNS, &mut RandomStream::new(opts.seed))?;
    let rows: Vec<Vec<f64>> = pmf
        .support()
        .iter()
        .zip(pmf.weights())
        .map(|(p, w)| vec![p[0], p[1], *w])
        .collect();
    let min_k = rows.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let min_l = rows.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let mean = |j: usize| rows.iter().map(|p| p[j] * p[2]).sum::<f64>();
    let mut t = Table::new(format!("Weibull parameters over {reps} fuzzed settings"), &["", "lambda", "k"]);
    t.push(vec![Cell::from("mean"), mean(0).into(), mean(1).into()]);
    t.push(vec![Cell::from("min"), min_l.into(), min_k.into()]);
    r.tables.push(t);
    r.checks.push(Check::new("min k", min_k, f64::MIN_POSITIVE, f64::INFINITY));
    r.checks.push(Check::new("min lambda", min_l, f64::MIN_POSITIVE, f64::INFINITY));
    r.files.push(write_csv(&opts.out.join("lambda_k.csv"), &["lambda", "k", "weight"], &rows)?);
    r.files.push(write_gnuplot(&opts.out.join("lambda_k.dat"), &[("(lambda, k)".into(), rows)])?);
    Ok(())
}
