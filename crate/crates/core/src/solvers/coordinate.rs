use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::model::{Diagnostics, FittedModel, Model};
use crate::params::Params;
use crate::settings::{MleMethod, MleSettings, SettingsGroup};
use crate::transforms::fix;

/// Dimension-by-dimension likelihood maximization from the model's
/// default start.
pub fn coordinate_cycle(m: &Model, d: &DataSet, st: &MleSettings) -> Result<FittedModel> {
    coordinate_cycle_from(m, d, &m.start_params(d), st)
}

/// Cycles over the free coordinates of `start`, maximizing each one in
/// turn on `fix(m, everything else)`, until a full cycle improves the
/// log-likelihood by less than `st.tolerance`. The objective never
/// decreases from one step to the next.
pub fn coordinate_cycle_from(
    m: &Model,
    d: &DataSet,
    start: &Params,
    st: &MleSettings,
) -> Result<FittedModel> {
    st.validate()?;
    let mask = start.fixed_mask();
    let free: Vec<usize> = (0..start.len()).filter(|&i| !mask[i]).collect();
    let inner = m.with_setting(SettingsGroup::Mle(MleSettings {
        method: MleMethod::NelderMead,
        restarts: 1,
        max_iter: MleSettings::default().max_iter,
        ..st.clone()
    }))?;
    let mut cur = start.clone();
    let mut cur_val = inner.penalized_log_likelihood(d, &cur);
    if cur_val.is_nan() || cur_val == f64::NEG_INFINITY {
        return Err(Error::InfeasibleStart);
    }
    let mut cycles = 0;
    let mut converged = free.is_empty();
    while !converged && cycles < st.max_iter {
        cycles += 1;
        let before = cur_val;
        for &i in &free {
            let attempt = if cur.len() == 1 {
                inner.estimate_from(d, &cur)
            } else {
                let mut partial = cur.values().to_vec();
                partial[i] = f64::NAN;
                let pinned = Params::from_partial(&cur, &partial)?;
                let sub = fix(&inner, &pinned)?;
                let x0 = sub.param_shape().with_values(&[cur.values()[i]])?;
                sub.estimate_from(d, &x0)
            };
            let fitted = match attempt {
                Ok(f) => f,
                Err(Error::InfeasibleStart) => continue,
                Err(e) => return Err(e),
            };
            let mut values = cur.values().to_vec();
            values[i] = fitted.params.values()[0];
            let candidate = cur.with_values(&values)?;
            let val = inner.penalized_log_likelihood(d, &candidate);
            if val >= cur_val {
                cur = candidate;
                cur_val = val;
            }
        }
        converged = cur_val - before < st.tolerance;
    }
    let params = m.check_constraint(&cur).projected;
    Ok(FittedModel {
        model: m.clone(),
        params: params.with_fixed_mask(mask)?,
        diagnostics: Diagnostics {
            log_likelihood_at_optimum: f64::NAN,
            iterations: cycles,
            converged,
            constraint_violation: 0.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataDim;
    use crate::solvers::nelder_mead;

    fn separable() -> Model {
        Model::builder(
            "separable",
            DataDim::Fixed(2),
            Params::new("a", vec![0.0]).with_block("b", vec![0.0]),
        )
        .log_likelihood_row(|x, p| {
            Ok(-(x[0] - p.values()[0]).powi(2) - (x[1] - p.values()[1]).powi(2))
        })
        .build()
    }

    #[test]
    fn separable_objective_done_after_one_cycle() {
        let m = separable();
        let d = DataSet::new(vec![vec![1.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let one = coordinate_cycle(&m, &d, &MleSettings { max_iter: 1, ..Default::default() })
            .unwrap();
        let full = coordinate_cycle(&m, &d, &MleSettings::default()).unwrap();
        assert!((one.params.values()[0] - 2.0).abs() < 1e-4);
        assert!((one.params.values()[1] - 5.0).abs() < 1e-4);
        assert!((one.params.values()[0] - full.params.values()[0]).abs() < 1e-6);
        assert!(full.diagnostics.converged);
    }

    #[test]
    fn one_dimensional_matches_simplex() {
        let m = Model::builder("quad", DataDim::Fixed(1), Params::new("x", vec![0.0]))
            .log_likelihood_row(|d, p| Ok(-(d[0] - p.values()[0]).powi(2)))
            .build();
        let d = DataSet::from_column(&[3.0]);
        let c = coordinate_cycle(&m, &d, &MleSettings::default()).unwrap();
        let n = nelder_mead(
            |p| m.log_likelihood(&d, p).unwrap(),
            m.param_shape(),
            &MleSettings::default(),
        )
        .unwrap();
        assert!((c.params.values()[0] - n.params.values()[0]).abs() < 1e-6);
    }
}
