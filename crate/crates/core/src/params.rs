//! Named-block parameter vectors.
//!
//! A [`Params`] is a flat `Vec<f64>` partitioned into named blocks
//! (`mu`, `sigma`, `beta`, `weights`, ...) plus an optional per-entry mask
//! marking entries that are pinned during estimation. An empty `Params`
//! represents a model without parameters.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    blocks: Vec<(String, usize)>,
    values: Vec<f64>,
    fixed: Option<Vec<bool>>,
}

impl Params {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Single-block constructor.
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self::empty().with_block(name, values)
    }

    pub fn with_block(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.blocks.push((name.into(), values.len()));
        if let Some(mask) = &mut self.fixed {
            mask.extend(std::iter::repeat_n(false, values.len()));
        }
        self.values.extend(values);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&str, &[f64])> + '_ {
        let mut start = 0;
        self.blocks.iter().map(move |(name, len)| {
            let slice = &self.values[start..start + len];
            start += len;
            (name.as_str(), slice)
        })
    }

    pub fn block_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.blocks.iter().map(|(n, _)| n.as_str())
    }

    fn block_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for (n, len) in &self.blocks {
            if n == name {
                return Some(start..start + len);
            }
            start += len;
        }
        None
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.block_range(name).map(|r| &self.values[r])
    }

    /// First entry of a block; panics when the block is absent, which is a
    /// programming error inside the model implementations.
    pub fn get(&self, name: &str) -> f64 {
        self.block(name)
            .and_then(|b| b.first().copied())
            .unwrap_or_else(|| panic!("parameter block `{name}` missing from {self}"))
    }

    pub fn set_block(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let range = self
            .block_range(name)
            .ok_or_else(|| Error::invalid(format!("no parameter block named `{name}`")))?;
        if range.len() != values.len() {
            return Err(Error::ParamMismatch {
                expected: range.len(),
                found: values.len(),
            });
        }
        self.values[range].copy_from_slice(values);
        Ok(())
    }

    /// Same block layout, new values.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::ParamMismatch {
                expected: self.values.len(),
                found: values.len(),
            });
        }
        let mut out = self.clone();
        out.values.copy_from_slice(values);
        Ok(out)
    }

    /// Flattened per-entry labels: `mu`, `beta[0]`, `beta[1]`, ...
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for (name, len) in &self.blocks {
            if *len == 1 {
                out.push(name.clone());
            } else {
                out.extend((0..*len).map(|i| format!("{name}[{i}]")));
            }
        }
        out
    }

    pub fn fixed_mask(&self) -> Vec<bool> {
        self.fixed.clone().unwrap_or_else(|| vec![false; self.len()])
    }

    pub fn has_fixed(&self) -> bool {
        self.fixed.as_ref().is_some_and(|m| m.iter().any(|&f| f))
    }

    pub fn with_fixed_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::ParamMismatch {
                expected: self.len(),
                found: mask.len(),
            });
        }
        self.fixed = Some(mask);
        Ok(self)
    }

    /// Marks every entry of the named block as pinned at the given values.
    pub fn pin(mut self, name: &str, values: &[f64]) -> Result<Self> {
        self.set_block(name, values)?;
        let range = self.block_range(name).expect("checked by set_block");
        let mut mask = self.fixed_mask();
        mask[range].iter_mut().for_each(|m| *m = true);
        self.fixed = Some(mask);
        Ok(self)
    }

    /// Pin entries flagged in `mask` to the values carried by `self`, leaving
    /// other entries free. Non-NaN convention: entries given as NaN are free.
    pub fn from_partial(template: &Params, partial: &[f64]) -> Result<Self> {
        if partial.len() != template.len() {
            return Err(Error::ParamMismatch {
                expected: template.len(),
                found: partial.len(),
            });
        }
        let mut out = template.clone();
        let mut mask = vec![false; template.len()];
        for (i, &v) in partial.iter().enumerate() {
            if !v.is_nan() {
                out.values[i] = v;
                mask[i] = true;
            }
        }
        out.fixed = Some(mask);
        Ok(out)
    }

    /// Cartesian product of parameter spaces: blocks of `self` followed by
    /// blocks of `other`.
    pub fn concat(&self, other: &Params) -> Params {
        let mut out = self.clone();
        let mut mask = self.fixed_mask();
        mask.extend(other.fixed_mask());
        out.blocks.extend(other.blocks.iter().cloned());
        out.values.extend_from_slice(&other.values);
        out.fixed = (self.fixed.is_some() || other.fixed.is_some()).then_some(mask);
        out
    }

    /// Concatenates several parameter sets, prefixing block names with
    /// `prefix{i}.` when any block name would otherwise repeat.
    pub fn concat_all(parts: &[&Params], prefix: &str) -> Params {
        let mut seen = std::collections::HashSet::new();
        let collide = parts
            .iter()
            .flat_map(|p| p.block_names())
            .any(|n| !seen.insert(n.to_owned()));
        let mut out = Params::empty();
        for (i, part) in parts.iter().enumerate() {
            let renamed = if collide {
                part.renamed(|n| format!("{prefix}{i}.{n}"))
            } else {
                (*part).clone()
            };
            out = out.concat(&renamed);
        }
        out
    }

    pub fn renamed(&self, f: impl Fn(&str) -> String) -> Params {
        let mut out = self.clone();
        for (name, _) in &mut out.blocks {
            *name = f(name);
        }
        out
    }

    /// Splits into consecutive pieces of the given lengths.
    pub fn split_values<'a>(&'a self, lens: &[usize]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(lens.len());
        let mut start = 0;
        for &len in lens {
            out.push(&self.values[start..start + len]);
            start += len;
        }
        out
    }

    /// Keeps only the entries whose mask is false, preserving block names.
    pub fn free_part(&self) -> Params {
        let mask = self.fixed_mask();
        let mut out = Params::empty();
        let mut idx = 0;
        for (name, len) in &self.blocks {
            let vals: Vec<f64> = (idx..idx + len)
                .filter(|&i| !mask[i])
                .map(|i| self.values[i])
                .collect();
            idx += len;
            if !vals.is_empty() {
                out = out.with_block(name.clone(), vals);
            }
        }
        out
    }

    /// Bit pattern of the values, for use as a cache key.
    pub fn key(&self) -> Vec<u64> {
        self.values.iter().map(|v| v.to_bits()).collect()
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (name, vals)) in self.blocks().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if vals.len() == 1 {
                write!(f, "{name}={}", vals[0])?;
            } else {
                write!(f, "{name}={vals:?}")?;
            }
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn blocks_and_labels() {
        let p = Params::new("mu", vec![1.0])
            .with_block("beta", vec![2.0, 3.0])
            .with_block("sigma", vec![4.0]);
        assert_eq!(p.len(), 4);
        assert_eq!(p.block("beta"), Some(&[2.0, 3.0][..]));
        assert_eq!(p.labels(), vec!["mu", "beta[0]", "beta[1]", "sigma"]);
        assert_eq!(p.get("sigma"), 4.0);
    }

    #[test]
    fn pin_and_free_part() {
        let p = Params::new("mu", vec![0.0])
            .with_block("sigma", vec![1.0])
            .pin("sigma", &[2.0])
            .unwrap();
        assert_eq!(p.fixed_mask(), vec![false, true]);
        let free = p.free_part();
        assert_eq!(free.labels(), vec!["mu"]);
    }

    #[test]
    fn colliding_names_get_prefixed() {
        let a = Params::new("mu", vec![0.0]);
        let b = Params::new("mu", vec![1.0]);
        let c = Params::concat_all(&[&a, &b], "m");
        assert_eq!(c.labels(), vec!["m0.mu", "m1.mu"]);
        let d = Params::new("lambda", vec![1.0]);
        let e = Params::concat_all(&[&a, &d], "m");
        assert_eq!(e.labels(), vec!["mu", "lambda"]);
    }

    proptest! {
        #[test]
        fn concat_is_associative(a in prop::collection::vec(-10.0f64..10.0, 0..4),
                                 b in prop::collection::vec(-10.0f64..10.0, 0..4),
                                 c in prop::collection::vec(-10.0f64..10.0, 0..4)) {
            let (pa, pb, pc) = (Params::new("a", a), Params::new("b", b), Params::new("c", c));
            let left = pa.concat(&pb).concat(&pc);
            let right = pa.concat(&pb.concat(&pc));
            prop_assert_eq!(&left, &right);
            prop_assert_eq!(left.len(), pa.len() + pb.len() + pc.len());
        }
    }
}
