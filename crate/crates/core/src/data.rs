//! Weighted observation sets.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dimension descriptor of a data space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataDim {
    Fixed(usize),
    /// Rows may differ in length (PMF support sets).
    Variable,
}

impl DataDim {
    pub fn fixed(self) -> Option<usize> {
        match self {
            DataDim::Fixed(d) => Some(d),
            DataDim::Variable => None,
        }
    }

    pub fn accepts(self, len: usize) -> bool {
        match self {
            DataDim::Fixed(d) => d == len,
            DataDim::Variable => true,
        }
    }
}

impl std::fmt::Display for DataDim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataDim::Fixed(0) => write!(f, "∅"),
            DataDim::Fixed(1) => write!(f, "R"),
            DataDim::Fixed(d) => write!(f, "R^{d}"),
            DataDim::Variable => write!(f, "variable"),
        }
    }
}

/// Lexicographic comparison with a total order on floats.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Componentwise `a <= b` (orthant comparison).
pub fn orthant_le(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x <= y)
}

/// An ordered collection of observation rows with optional nonnegative
/// weights, column names, and group labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DataSet {
    rows: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
    names: Option<Vec<String>>,
    groups: Option<Vec<usize>>,
    variable: bool,
}

impl DataSet {
    /// Rows must share one dimension.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let d = first.len();
            if let Some(bad) = rows.iter().find(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d.to_string(),
                    found: bad.len().to_string(),
                });
            }
        }
        Ok(Self {
            rows,
            ..Self::default()
        })
    }

    /// Rows of differing lengths are allowed.
    pub fn variable(rows: Vec<Vec<f64>>) -> Self {
        Self {
            rows,
            variable: true,
            ..Self::default()
        }
    }

    pub fn from_column(values: &[f64]) -> Self {
        Self {
            rows: values.iter().map(|&v| vec![v]).collect(),
            ..Self::default()
        }
    }

    /// A single zero-dimensional row, the data set of models with an empty
    /// data space.
    pub fn unit() -> Self {
        Self {
            rows: vec![Vec::new()],
            ..Self::default()
        }
    }

    pub fn single(row: Vec<f64>) -> Self {
        Self {
            rows: vec![row],
            ..Self::default()
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", self.rows.len()),
                found: weights.len().to_string(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if !weights.is_empty() && weights.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("at least one weight must be positive"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = Some(names);
        self
    }

    pub fn with_groups(mut self, groups: Vec<usize>) -> Result<Self> {
        if groups.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} group labels", self.rows.len()),
                found: groups.len().to_string(),
            });
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_variable(&self) -> bool {
        self.variable
    }

    /// Common row dimension; `None` for an empty or variable-dimension set.
    pub fn dim(&self) -> Option<usize> {
        if self.variable {
            return None;
        }
        self.rows.first().map(Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn groups(&self) -> Option<&[usize]> {
        self.groups.as_deref()
    }

    pub fn total_weight(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.rows.len() as f64,
        }
    }

    /// `(row, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.as_slice(), self.weight(i)))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Keeps rows at the given indices, carrying weights and groups along.
    pub fn subset(&self, idx: &[usize]) -> DataSet {
        DataSet {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| idx.iter().map(|&i| w[i]).collect()),
            names: self.names.clone(),
            groups: self
                .groups
                .as_ref()
                .map(|g| idx.iter().map(|&i| g[i]).collect()),
            variable: self.variable,
        }
    }

    /// Columns `start..start+len` of every row.
    pub fn slice_columns(&self, start: usize, len: usize) -> DataSet {
        DataSet {
            rows: self
                .rows
                .iter()
                .map(|r| r[start..start + len].to_vec())
                .collect(),
            weights: self.weights.clone(),
            names: self
                .names
                .as_ref()
                .filter(|n| n.len() >= start + len)
                .map(|n| n[start..start + len].to_vec()),
            groups: self.groups.clone(),
            variable: false,
        }
    }

    /// Replaces every row via `f`, keeping weights and groups.
    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> DataSet {
        DataSet {
            rows: self.rows.iter().map(|r| f(r)).collect(),
            weights: self.weights.clone(),
            names: None,
            groups: self.groups.clone(),
            variable: self.variable,
        }
    }

    /// Replaces weights (length must match), bypassing the positivity check
    /// for internal reweighting where all-zero weights cannot occur.
    pub(crate) fn reweighted(&self, weights: Vec<f64>) -> DataSet {
        debug_assert_eq!(weights.len(), self.rows.len());
        DataSet {
            weights: Some(weights),
            ..self.clone()
        }
    }

    /// Partition rows by group label in first-appearance order; the whole
    /// set is one group when no labels are present.
    pub fn split_groups(&self) -> Vec<DataSet> {
        let Some(groups) = &self.groups else {
            return vec![self.clone()];
        };
        let mut order: Vec<usize> = Vec::new();
        let mut members: std::collections::HashMap<usize, Vec<usize>> = Default::default();
        for (i, &g) in groups.iter().enumerate() {
            members
                .entry(g)
                .or_insert_with(|| {
                    order.push(g);
                    Vec::new()
                })
                .push(i);
        }
        order
            .iter()
            .map(|g| {
                let mut part = self.subset(&members[g]);
                part.groups = None;
                part
            })
            .collect()
    }

    /// Reads RFC-4180 CSV. A header row is detected when any field of the
    /// first record fails to parse as a number; a final header column named
    /// `weight` becomes row weights and a column named `group` becomes group
    /// labels.
    pub fn read_csv<R: Read>(reader: R) -> Result<DataSet> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let mut rows = Vec::new();
        let mut header: Option<Vec<String>> = None;
        if let Some(first) = records.next() {
            let first = first?;
            let parsed: Option<Vec<f64>> =
                first.iter().map(|f| f.parse::<f64>().ok()).collect();
            match parsed {
                Some(row) => rows.push(row),
                None => header = Some(first.iter().map(str::to_owned).collect()),
            }
        }
        for (line, rec) in records.enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        Error::invalid(format!("non-numeric field `{f}` in data row {}", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let mut weight_col = None;
        let mut group_col = None;
        if let Some(h) = &header {
            if h.last().is_some_and(|n| n.eq_ignore_ascii_case("weight")) {
                weight_col = Some(h.len() - 1);
            }
            group_col = h.iter().position(|n| n.eq_ignore_ascii_case("group"));
        }
        let mut weights = weight_col.map(|_| Vec::with_capacity(rows.len()));
        let mut groups = group_col.map(|_| Vec::with_capacity(rows.len()));
        let data_rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| {
                if let (Some(c), Some(w)) = (weight_col, weights.as_mut()) {
                    w.push(r[c]);
                }
                if let (Some(c), Some(g)) = (group_col, groups.as_mut()) {
                    g.push(r[c] as usize);
                }
                r.into_iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != weight_col && Some(*i) != group_col)
                    .map(|(_, v)| v)
                    .collect()
            })
            .collect();
        let mut ds = DataSet::new(data_rows)?;
        if let Some(h) = header {
            ds.names = Some(
                h.into_iter()
                    .enumerate()
                    .filter(|(i, _)| Some(*i) != weight_col && Some(*i) != group_col)
                    .map(|(_, n)| n)
                    .collect(),
            );
        }
        if let Some(w) = weights {
            ds = ds.with_weights(w)?;
        }
        if let Some(g) = groups {
            ds = ds.with_groups(g)?;
        }
        Ok(ds)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<DataSet> {
        DataSet::read_csv(std::fs::File::open(path)?)
    }

    /// Writes CSV with a header (names or `c0..`), plus `group` and `weight`
    /// columns when present. Values are written unrounded.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut header: Vec<String> = match &self.names {
            Some(n) if n.len() == d => n.clone(),
            _ => (0..d).map(|i| format!("c{i}")).collect(),
        };
        if self.groups.is_some() {
            header.push("group".into());
        }
        if self.weights.is_some() {
            header.push("weight".into());
        }
        w.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(g) = &self.groups {
                rec.push(g[i].to_string());
            }
            if let Some(wt) = &self.weights {
                rec.push(wt[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        assert!(DataSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert_eq!(DataSet::variable(vec![vec![1.0], vec![1.0, 2.0]]).dim(), None);
    }

    #[test]
    fn weight_validation() {
        let d = DataSet::from_column(&[1.0, 2.0]);
        assert!(d.clone().with_weights(vec![-1.0, 1.0]).is_err());
        assert!(d.clone().with_weights(vec![0.0, 0.0]).is_err());
        assert!(d.with_weights(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn csv_with_header_weight_and_group() {
        let text = "x,y,group,weight\n1,2,0,0.5\n3,4,1,1.5\n";
        let d = DataSet::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.weights(), Some(&[0.5, 1.5][..]));
        assert_eq!(d.groups(), Some(&[0, 1][..]));
        assert_eq!(d.names().unwrap(), &["x".to_string(), "y".to_string()]);

        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let back = DataSet::read_csv(out.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_without_header_and_quoted_fields() {
        let text = "\"1\",2\n3,\"4\"\n";
        let d = DataSet::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.rows(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(d.names().is_none());
    }

    #[test]
    fn lexicographic_and_orthant_orders() {
        assert_eq!(lex_cmp(&[1.0, 5.0], &[2.0, 0.0]), Ordering::Less);
        assert_eq!(lex_cmp(&[1.0, 5.0], &[1.0, 5.0]), Ordering::Equal);
        assert!(orthant_le(&[1.0, 5.0], &[1.0, 5.0]));
        assert!(!orthant_le(&[1.0, 5.0], &[2.0, 0.0]));
    }

    #[test]
    fn groups_split_in_first_seen_order() {
        let d = DataSet::from_column(&[1.0, 2.0, 3.0, 4.0])
            .with_groups(vec![7, 3, 7, 3])
            .unwrap();
        let parts = d.split_groups();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].column(0), vec![1.0, 3.0]);
        assert_eq!(parts[1].column(0), vec![2.0, 4.0]);
    }
}
