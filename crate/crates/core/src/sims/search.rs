use crate::data::{DataDim, DataSet};
use crate::distributions::{weibull_model, Pmf};
use crate::error::{Error, Result};
use crate::model::{DataKind, Model};
use crate::params::Params;
use crate::stream::RandomStream;

/// Ticks after which a run is abandoned.
pub const MAX_TICKS: u64 = 50_000_000;
/// Runs pooled into each Weibull fit of [`fuzz_weibull_posterior`].
pub const FUZZ_RUNS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    /// Agents of each type.
    pub n_pairs: usize,
}

impl SearchConfig {
    pub fn square(side: usize, n_pairs: usize) -> Self {
        Self {
            grid_w: side,
            grid_h: side,
            n_pairs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::invalid("the search model needs at least one pair"));
        }
        if 2 * self.n_pairs > self.grid_w * self.grid_h {
            return Err(Error::invalid(format!(
                "{} agents do not fit on a {}x{} grid",
                2 * self.n_pairs,
                self.grid_w,
                self.grid_h
            )));
        }
        Ok(())
    }
}

struct Grid {
    w: usize,
    h: usize,
    cells: Vec<Option<usize>>,
}

impl Grid {
    fn neighbours(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = ((c % self.w) as isize, (c / self.w) as isize);
        (-1isize..=1)
            .flat_map(move |dy| (-1isize..=1).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx != 0 || dy != 0)
            .filter_map(move |(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && (nx as usize) < self.w && (ny as usize) < self.h)
                    .then(|| ny as usize * self.w + nx as usize)
            })
    }
}

/// One run: pairing time of every agent, A agents first. Each tick, every
/// unpaired agent in index order pairs with its lowest-indexed adjacent
/// unpaired agent of the other type; then each remaining agent steps to a
/// random unoccupied neighbouring cell (or stays if there is none).
pub fn search_run(cfg: &SearchConfig, s: &mut RandomStream) -> Result<Vec<u64>> {
    cfg.validate()?;
    let n = 2 * cfg.n_pairs;
    let mut grid = Grid {
        w: cfg.grid_w,
        h: cfg.grid_h,
        cells: vec![None; cfg.grid_w * cfg.grid_h],
    };
    let mut pos = Vec::with_capacity(n);
    for a in 0..n {
        loop {
            let c = s.index(grid.cells.len());
            if grid.cells[c].is_none() {
                grid.cells[c] = Some(a);
                pos.push(c);
                break;
            }
        }
    }
    let is_a = |i: usize| i < cfg.n_pairs;
    let mut time = vec![0u64; n];
    let mut left = n;
    let mut tick = 0u64;
    let mut free_cells = Vec::with_capacity(8);
    while left > 0 {
        tick += 1;
        if tick > MAX_TICKS {
            return Err(Error::invalid(format!("search run did not finish in {MAX_TICKS} ticks")));
        }
        let mut paired = Vec::new();
        for i in 0..n {
            if time[i] != 0 || paired.contains(&i) {
                continue;
            }
            let partner = grid
                .neighbours(pos[i])
                .filter_map(|c| grid.cells[c])
                .filter(|&j| is_a(j) != is_a(i) && !paired.contains(&j))
                .min();
            if let Some(j) = partner {
                paired.push(i);
                paired.push(j);
            }
        }
        for &i in &paired {
            time[i] = tick;
            grid.cells[pos[i]] = None;
            left -= 1;
        }
        for i in 0..n {
            if time[i] != 0 {
                continue;
            }
            free_cells.clear();
            free_cells.extend(grid.neighbours(pos[i]).filter(|&c| grid.cells[c].is_none()));
            if free_cells.is_empty() {
                continue;
            }
            let c = free_cells[s.index(free_cells.len())];
            grid.cells[pos[i]] = None;
            grid.cells[c] = Some(i);
            pos[i] = c;
        }
    }
    Ok(time)
}

/// The search simulation as a model with an empty parameter space whose
/// rows are the agents' pairing times.
pub fn search_model(cfg: SearchConfig) -> Result<Model> {
    cfg.validate()?;
    Ok(Model::builder("search_sim", DataDim::Fixed(2 * cfg.n_pairs), Params::empty())
        .data_kind(DataKind::Discrete)
        .sampler(move |_, s| Ok(search_run(&cfg, s)?.into_iter().map(|t| t as f64).collect()))
        .build())
}

/// Pairing times from `runs` runs as a single column.
pub fn pooled_times(cfg: &SearchConfig, runs: usize, s: &mut RandomStream) -> Result<DataSet> {
    let mut all = Vec::with_capacity(runs * 2 * cfg.n_pairs);
    for _ in 0..runs {
        all.extend(search_run(cfg, s)?.into_iter().map(|t| t as f64));
    }
    Ok(DataSet::from_column(&all))
}

/// Weibull `(lambda, k)` fitted to pooled pairing times.
pub fn fit_weibull(times: &DataSet) -> Result<(f64, f64)> {
    let f = weibull_model().estimate(times)?;
    Ok((f.params.get("lambda"), f.params.get("k")))
}

/// A one-dimensional model with its parameters, used as a prior over a
/// simulation setting.
#[derive(Clone, Debug)]
pub struct SettingPrior {
    pub model: Model,
    pub params: Params,
}

impl SettingPrior {
    pub fn new(model: Model, params: Params) -> Self {
        Self { model, params }
    }

    fn draw(&self, s: &mut RandomStream) -> Result<f64> {
        Ok(self.model.draw(&self.params, s)?[0])
    }
}

/// Draws a grid side and a pair count from the priors (rounded, and
/// clamped so the agents fit), pools `runs` search runs, fits a Weibull,
/// and repeats `reps` times. Returns the equal-weight PMF of the fitted
/// `(lambda, k)` points.
pub fn fuzz_weibull_posterior(
    side: &SettingPrior,
    pairs: &SettingPrior,
    reps: usize,
    runs: usize,
    s: &mut RandomStream,
) -> Result<Pmf> {
    if reps == 0 || runs == 0 {
        return Err(Error::invalid("fuzzing needs at least one rep and one run"));
    }
    let mut points = Vec::with_capacity(reps);
    for _ in 0..reps {
        let g = side.draw(s)?.round().max(2.0) as usize;
        let cap = g * g / 2;
        let k = (pairs.draw(s)?.round().max(1.0) as usize).min(cap);
        let cfg = SearchConfig::square(g, k);
        let (lambda, shape) = fit_weibull(&pooled_times(&cfg, runs, s)?)?;
        points.push(vec![lambda, shape]);
    }
    Pmf::from_rows(points, vec![1.0; reps])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{normal_model, pmf_model};

    #[test]
    fn forced_adjacency() {
        let cfg = SearchConfig {
            grid_w: 1,
            grid_h: 2,
            n_pairs: 1,
        };
        let m = search_model(cfg).unwrap();
        let mut s = RandomStream::new(0);
        for _ in 0..10 {
            assert_eq!(m.draw(&Params::empty(), &mut s).unwrap(), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn capacity_is_checked() {
        assert!(search_model(SearchConfig::square(3, 5)).is_err());
        assert!(search_model(SearchConfig::square(3, 4)).is_ok());
    }

    #[test]
    fn full_grid_pairs_everyone() {
        let mut s = RandomStream::new(2);
        let t = search_run(&SearchConfig::square(4, 8), &mut s).unwrap();
        assert!(t.iter().all(|&x| x >= 1));
    }

    #[test]
    fn partners_share_a_time() {
        let mut s = RandomStream::new(6);
        let t = search_run(&SearchConfig::square(10, 10), &mut s).unwrap();
        let mut a: Vec<u64> = t[..10].to_vec();
        let mut b: Vec<u64> = t[10..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_grid_is_slower() {
        let mean = |side| {
            let mut s = RandomStream::new(1);
            let d = pooled_times(&SearchConfig::square(side, 45), 3, &mut s).unwrap();
            d.column(0).iter().sum::<f64>() / d.len() as f64
        };
        assert!(mean(30) > mean(10));
    }

    #[test]
    fn point_mass_priors() {
        let side = SettingPrior::new(pmf_model(&DataSet::from_column(&[8.0])).unwrap(), Params::empty());
        let pairs = SettingPrior::new(pmf_model(&DataSet::from_column(&[4.0])).unwrap(), Params::empty());
        let pmf = fuzz_weibull_posterior(&side, &pairs, 5, 10, &mut RandomStream::new(3)).unwrap();
        assert!(pmf.support().iter().all(|r| r[0] > 0.0 && r[1] > 0.0));
    }

    #[test]
    fn wide_priors_are_clamped() {
        let p = Params::new("mu", vec![3.0]).with_block("sigma", vec![5.0]);
        let side = SettingPrior::new(normal_model(), p.clone());
        let pairs = SettingPrior::new(normal_model(), p.with_values(&[20.0, 10.0]).unwrap());
        let pmf = fuzz_weibull_posterior(&side, &pairs, 4, 3, &mut RandomStream::new(8)).unwrap();
        assert!(!pmf.is_empty());
    }
}
