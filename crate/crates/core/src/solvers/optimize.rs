use crate::error::{Error, Result};
use crate::params::Params;
use crate::settings::MleSettings;
use crate::stream::RandomStream;

/// Outcome of a maximization.
#[derive(Clone, Debug)]
pub struct OptimResult {
    pub params: Params,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn free_indices(x0: &Params) -> Vec<usize> {
    x0.fixed_mask()
        .iter()
        .enumerate()
        .filter(|(_, &m)| !m)
        .map(|(i, _)| i)
        .collect()
}

fn embed(x0: &Params, idx: &[usize], free: &[f64]) -> Params {
    let mut v = x0.values().to_vec();
    for (&i, &x) in idx.iter().zip(free) {
        v[i] = x;
    }
    x0.with_values(&v).expect("same length")
}

fn start_value(f: &impl Fn(&Params) -> f64, x0: &Params) -> Result<f64> {
    let v = f(x0);
    if v.is_nan() || v == f64::NEG_INFINITY {
        return Err(Error::InfeasibleStart);
    }
    Ok(v)
}

/// Derivative-free maximization of `f` by the Nelder-Mead simplex.
/// Entries pinned in `x0`'s fixed mask are held constant.
pub fn nelder_mead(
    f: impl Fn(&Params) -> f64,
    x0: &Params,
    st: &MleSettings,
) -> Result<OptimResult> {
    st.validate()?;
    let f0 = start_value(&f, x0)?;
    let idx = free_indices(x0);
    if idx.is_empty() {
        return Ok(OptimResult {
            params: x0.clone(),
            value: f0,
            iterations: 0,
            converged: true,
        });
    }
    // Minimize the negated objective; NaN counts as infinitely bad.
    let g = |free: &[f64]| {
        let v = -f(&embed(x0, &idx, free));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best: Vec<f64> = idx.iter().map(|&i| x0.values()[i]).collect();
    let mut best_val = -f0;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..st.restarts {
        let run = simplex_run(&g, &best, best_val, st, st.max_iter.saturating_sub(iterations));
        iterations += run.2;
        converged = run.3;
        if run.1 <= best_val {
            best = run.0;
            best_val = run.1;
        }
        if iterations >= st.max_iter {
            break;
        }
    }
    Ok(OptimResult {
        params: embed(x0, &idx, &best),
        value: -best_val,
        iterations,
        converged,
    })
}

fn simplex_run(
    g: &impl Fn(&[f64]) -> f64,
    start: &[f64],
    start_val: f64,
    st: &MleSettings,
    budget: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = start.len();
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut vals = vec![start_val];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += st.step * start[i].abs().max(1.0);
        vals.push(g(&p));
        pts.push(p);
    }
    let mut iter = 0;
    let mut converged = false;
    while iter < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < st.tolerance {
            converged = true;
            break;
        }
        iter += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = g(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = g(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let x = along(0.5);
            let v = g(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = g(&x);
            (x, v)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[i]
                .iter()
                .zip(&pts[0])
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            vals[i] = g(&shrunk);
            pts[i] = shrunk;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("nonempty simplex");
    (pts[best].clone(), vals[best], iter, converged)
}

/// Maximization by simulated annealing with a geometric cooling schedule.
/// The step size shrinks from `st.step` to `st.tolerance` over
/// `st.max_iter` proposals; the best point visited is returned.
pub fn simulated_annealing(
    f: impl Fn(&Params) -> f64,
    x0: &Params,
    st: &MleSettings,
) -> Result<OptimResult> {
    st.validate()?;
    let f0 = start_value(&f, x0)?;
    let idx = free_indices(x0);
    if idx.is_empty() {
        return Ok(OptimResult {
            params: x0.clone(),
            value: f0,
            iterations: 0,
            converged: true,
        });
    }
    let mut s = RandomStream::new(st.seed);
    let scale: Vec<f64> = idx.iter().map(|&i| x0.values()[i].abs().max(1.0)).collect();
    let mut x: Vec<f64> = idx.iter().map(|&i| x0.values()[i]).collect();
    let mut fx = f0;
    let (mut best, mut best_val) = (x.clone(), f0);
    let t0 = (0.01 * f0.abs()).max(1.0);
    let t_ratio = 1e-6_f64;
    let step_ratio = (st.tolerance / st.step).min(1.0);
    let iters = st.max_iter;
    for k in 0..iters {
        let frac = k as f64 / iters as f64;
        let temp = t0 * t_ratio.powf(frac);
        let step = st.step * step_ratio.powf(frac);
        let cand: Vec<f64> = x
            .iter()
            .zip(&scale)
            .map(|(xi, sc)| xi + step * sc * s.standard_normal())
            .collect();
        let fc = f(&embed(x0, &idx, &cand));
        let u = s.uniform();
        if fc.is_nan() {
            continue;
        }
        if fc >= fx || u < ((fc - fx) / temp).exp() {
            x = cand;
            fx = fc;
            if fx > best_val {
                best = x.clone();
                best_val = fx;
            }
        }
    }
    Ok(OptimResult {
        params: embed(x0, &idx, &best),
        value: best_val,
        iterations: iters,
        converged: true,
    })
}
