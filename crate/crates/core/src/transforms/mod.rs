//! Model-to-model transformations. Each output model keeps a
//! [`TransformRecord`] in its settings and computes its elements by
//! delegating to the base models.

mod compose;
mod cross;
mod fix;
mod jacobian;
mod mix;
mod swap;
mod truncate;

use std::fmt;

pub use compose::{
    d_compose, dp_compose, pd_compose, posterior, posterior_strategy, NSeq, Posterior,
    PosteriorStrategy, DCOMPOSE_DRAWS, PRIOR_DRAWS,
};
pub use cross::cross;
pub use fix::{fix, fix_named};
pub use jacobian::{jacobian, Bijection};
pub use mix::{mix, mix_cdf, mix_cdf_weight};
pub use swap::swap;
pub use truncate::{region_mass, truncate, Region};

use crate::model::Model;
use crate::params::Params;

/// Which transformation built a model, from what, and with which data.
#[derive(Clone, Debug)]
pub struct TransformRecord {
    pub kind: &'static str,
    pub bases: Vec<Model>,
    pub data: TransformData,
}

#[derive(Clone)]
pub enum TransformData {
    Fix { pinned: Params },
    Cross { dims: Vec<usize>, param_lens: Vec<usize> },
    Mix { weights_pinned: bool },
    MixCdf,
    Truncate { region: Region },
    Jacobian { bijection: Bijection },
    Swap,
    DCompose { draws: usize, nseq: NSeq },
    DpCompose { rho: Params },
    PdCompose,
}

impl fmt::Debug for TransformData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformData::Fix { pinned } => write!(f, "Fix({pinned})"),
            TransformData::Cross { dims, .. } => write!(f, "Cross({dims:?})"),
            TransformData::Mix { weights_pinned } => write!(f, "Mix(pinned={weights_pinned})"),
            TransformData::MixCdf => write!(f, "MixCdf"),
            TransformData::Truncate { region } => write!(f, "Truncate({region:?})"),
            TransformData::Jacobian { bijection } => write!(f, "Jacobian({})", bijection.name),
            TransformData::Swap => write!(f, "Swap"),
            TransformData::DCompose { draws, nseq } => write!(f, "DCompose({draws}, {nseq:?})"),
            TransformData::DpCompose { rho } => write!(f, "DpCompose({rho})"),
            TransformData::PdCompose => write!(f, "PdCompose"),
        }
    }
}

pub(crate) fn record(kind: &'static str, bases: &[&Model], data: TransformData) -> crate::settings::SettingsGroup {
    crate::settings::SettingsGroup::Transform(std::sync::Arc::new(TransformRecord {
        kind,
        bases: bases.iter().map(|m| (*m).clone()).collect(),
        data,
    }))
}
