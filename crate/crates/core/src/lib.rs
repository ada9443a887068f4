//! Statistical models as values. A [`Model`] bundles a log-likelihood,
//! an estimator, a sampler and a CDF over a data space and a parameter
//! space; missing elements are filled in from the ones supplied.
//! Transformations in [`transforms`] build new models from old ones.
//!
//! ```
//! use modelkit::distributions::normal_model;
//! use modelkit::transforms::{truncate, Region};
//! use modelkit::{Params, RandomStream};
//!
//! let m = truncate(&normal_model(), Region::interval(0.0, f64::INFINITY)).unwrap();
//! let truth = Params::new("mu", vec![1.0]).with_block("sigma", vec![1.0]);
//! let d = m.draw_many(&truth, 5000, &mut RandomStream::new(7)).unwrap();
//! let fit = m.estimate(&d).unwrap();
//! assert!((fit.params.values()[0] - 1.0).abs() < 0.1);
//! ```

pub mod cli;
pub mod consistency;
pub mod data;
pub mod distributions;
pub mod error;
pub mod inference;
pub mod model;
pub mod params;
pub mod settings;
pub mod sims;
pub mod solvers;
pub mod stream;
pub mod transforms;

pub use data::{DataDim, DataSet};
pub use error::{Error, Result};
pub use model::{FittedModel, Model};
pub use params::Params;
pub use stream::RandomStream;
