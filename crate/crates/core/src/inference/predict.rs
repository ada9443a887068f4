use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::model::FittedModel;
use crate::params::Params;
use crate::stream::RandomStream;
use crate::transforms::{fix, swap};

/// A completed row and whether the search behind it converged.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub row: Vec<f64>,
    pub converged: bool,
}

/// Fills the NaN entries of `row` with their most likely values given the
/// known entries and the fitted parameters: the estimate of the swapped
/// model with the known coordinates pinned, whose single observation is
/// the parameter vector.
pub fn predict(fm: &FittedModel, row: &[f64]) -> Result<Prediction> {
    let dim = fm.model.data_dim();
    if !dim.accepts(row.len()) {
        return Err(Error::DimensionMismatch {
            expected: dim.to_string(),
            found: format!("row of length {}", row.len()),
        });
    }
    let missing: Vec<usize> = (0..row.len()).filter(|&i| row[i].is_nan()).collect();
    if missing.is_empty() {
        return Ok(Prediction {
            row: row.to_vec(),
            converged: true,
        });
    }
    let swapped = swap(&fm.model)?;
    let obs = DataSet::single(fm.params.values().to_vec());
    let mut fallback = RandomStream::new(0);
    let guess = fm.model.draw(&fm.params, &mut fallback).ok();
    let mut best = None;
    for attempt in [None, guess] {
        let start: Vec<f64> = (0..row.len())
            .map(|i| match (&attempt, row[i].is_nan()) {
                (_, false) => row[i],
                (Some(g), true) => g[i],
                (None, true) => 0.0,
            })
            .collect();
        let result = if missing.len() == row.len() {
            let start = swapped.param_shape().with_values(&start)?;
            swapped.estimate_from(&obs, &start).map(|f| (f.params.values().to_vec(), f.diagnostics.converged))
        } else {
            let pinned = Params::from_partial(&swapped.param_shape().with_values(&start)?, row)?;
            let sub = fix(&swapped, &pinned)?;
            let x0 = sub.param_shape().with_values(&missing.iter().map(|&i| start[i]).collect::<Vec<_>>())?;
            sub.estimate_from(&obs, &x0).map(|f| (f.params.values().to_vec(), f.diagnostics.converged))
        };
        match result {
            Ok(r) => {
                best = Some(r);
                break;
            }
            Err(Error::InfeasibleStart) => continue,
            Err(e) => return Err(e),
        }
    }
    let (values, converged) = best.ok_or(Error::InfeasibleStart)?;
    let mut out = row.to_vec();
    if missing.len() == row.len() {
        out.copy_from_slice(&values);
    } else {
        for (&i, v) in missing.iter().zip(values) {
            out[i] = v;
        }
    }
    if !converged {
        log::warn!("prediction search did not converge; consider more restarts");
    }
    Ok(Prediction { row: out, converged })
}
