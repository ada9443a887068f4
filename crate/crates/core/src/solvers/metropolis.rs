use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::Params;
use crate::settings::McmcSettings;
use crate::stream::RandomStream;

/// Post-burn-in output of a Metropolis run.
#[derive(Clone, Debug)]
pub struct Chain {
    /// Sampled states, flattened; see [`Chain::params`].
    pub samples: Vec<Vec<f64>>,
    pub log_densities: Vec<f64>,
    /// Accepted proposals over all proposals, burn-in included.
    pub acceptance_rate: f64,
    pub final_state: Params,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn params(&self, i: usize) -> Params {
        self.final_state
            .with_values(&self.samples[i])
            .expect("same layout")
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.samples.len() as f64;
        let mut m = vec![0.0; self.final_state.len()];
        for s in &self.samples {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b / n;
            }
        }
        m
    }
}

fn propose(
    proposal: Option<&Model>,
    n: usize,
    scale: f64,
    s: &mut RandomStream,
) -> Result<Vec<f64>> {
    match proposal {
        None => Ok((0..n).map(|_| scale * s.standard_normal()).collect()),
        Some(m) => {
            let first = m.draw(m.param_shape(), s)?;
            if first.len() == n {
                return Ok(first.into_iter().map(|v| v * scale).collect());
            }
            if first.len() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: format!("proposal of dimension 1 or {n}"),
                    found: format!("dimension {}", first.len()),
                });
            }
            let mut out = vec![first[0] * scale];
            for _ in 1..n {
                out.push(m.draw(m.param_shape(), s)?[0] * scale);
            }
            Ok(out)
        }
    }
}

/// Random-walk Metropolis over the free entries of `start`, targeting
/// `target` (a log density, possibly unnormalized). Runs `st.burnin`
/// discarded steps, then keeps every `st.thin`-th state until `n` are
/// collected. The proposal is a zero-centred symmetric model whose
/// draws are scaled by `st.step_scale`; `None` means a standard Normal
/// per coordinate.
pub fn metropolis(
    target: impl Fn(&[f64]) -> f64,
    start: &Params,
    proposal: Option<&Model>,
    st: &McmcSettings,
    n: usize,
    s: &mut RandomStream,
) -> Result<Chain> {
    st.validate()?;
    if n == 0 {
        return Err(Error::invalid("metropolis needs at least one sample"));
    }
    let mask = start.fixed_mask();
    let free: Vec<usize> = (0..start.len()).filter(|&i| !mask[i]).collect();
    let mut x = start.values().to_vec();
    let mut lx = target(&x);
    if lx.is_nan() || lx == f64::NEG_INFINITY {
        return Err(Error::InfeasibleStart);
    }
    let start_ld = lx;
    let total = st.burnin + n * st.thin;
    let mut samples = Vec::with_capacity(n);
    let mut log_densities = Vec::with_capacity(n);
    let mut accepted = 0usize;
    let mut cand = x.clone();
    for step in 0..total {
        let delta = propose(proposal, free.len(), st.step_scale, s)?;
        cand.copy_from_slice(&x);
        for (&i, d) in free.iter().zip(&delta) {
            cand[i] += d;
        }
        let lc = target(&cand);
        let u = s.uniform();
        if !lc.is_nan() && (lc >= lx || u < (lc - lx).exp()) {
            std::mem::swap(&mut x, &mut cand);
            lx = lc;
            accepted += 1;
        }
        if step + 1 == st.burnin && accepted == 0 && !free.is_empty() {
            return Err(Error::StuckChain {
                burnin: st.burnin,
                start_log_density: start_ld,
            });
        }
        if step >= st.burnin && (step - st.burnin + 1).is_multiple_of(st.thin) {
            samples.push(x.clone());
            log_densities.push(lx);
        }
    }
    Ok(Chain {
        samples,
        log_densities,
        acceptance_rate: if total == 0 { 0.0 } else { accepted as f64 / total as f64 },
        final_state: start.with_values(&x)?,
    })
}
