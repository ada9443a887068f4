use crate::data::{DataDim, DataSet};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::Params;
use crate::transforms::{record, TransformData};

/// Exchanges data and parameter spaces: rows of the new model are
/// parameter vectors of `m`, and its single parameter block `x` is a data
/// row of `m`. Only the likelihood carries over; the other elements fall
/// back to the defaults.
pub fn swap(m: &Model) -> Result<Model> {
    let DataDim::Fixed(dim) = m.data_dim() else {
        return Err(Error::space(m.label().to_string(), "swap needs fixed-dimension data"));
    };
    let shape = m.param_shape().clone().with_fixed_mask(vec![false; m.param_shape().len()])?;
    let new_shape = if dim == 0 {
        Params::empty()
    } else {
        Params::new("x", vec![0.0; dim])
    };
    let mut b = Model::builder(format!("swap({})", m.label()), DataDim::Fixed(shape.len()), new_shape)
        .inherit(m);
    if !shape.is_empty() && m.resolve().log_likelihood.is_resolvable() {
        let base = m.clone();
        b = b.log_likelihood_row(move |row, x| {
            let p = shape.with_values(row)?;
            if base.check_constraint(&p).violation > 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let ll = if dim == 0 {
                base.log_likelihood(&DataSet::unit(), &p)?
            } else {
                base.log_likelihood_row(x.values(), &p)?
            };
            Ok(if ll.is_nan() { f64::NEG_INFINITY } else { ll })
        });
    }
    Ok(b.setting(record("swap", &[m], TransformData::Swap)).delegated("swap").build())
}
