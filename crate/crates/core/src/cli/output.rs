//! Tables and gnuplot data files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;

/// `x` with six significant digits, trailing zeros dropped; exponent form
/// outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if !(-4..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{e}", trim(mant.to_string()));
    }
    // Rounding can carry into the next decade (999999.5 → 1e6).
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded.abs() >= 1e6 {
        return sig6(rounded);
    }
    trim(s)
}

/// A table printed either aligned (numbers at six significant digits) or
/// as CSV (numbers unrounded).
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Debug)]
pub enum Cell {
    Text(String),
    Num(f64),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
}

impl Table {
    pub fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(|c| match c {
                        Cell::Text(s) => s.clone(),
                        Cell::Num(x) => x.to_string(),
                    }))?;
                }
                Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
            }
            Format::Table => {
                let cells: Vec<Vec<String>> = self
                    .rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|c| match c {
                                Cell::Text(s) => s.clone(),
                                Cell::Num(x) => sig6(*x),
                            })
                            .collect()
                    })
                    .collect();
                let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
                for r in &cells {
                    for (j, c) in r.iter().enumerate() {
                        if j < width.len() {
                            width[j] = width[j].max(c.chars().count());
                        }
                    }
                }
                let mut out = String::new();
                if !self.title.is_empty() {
                    out.push_str(&self.title);
                    out.push('\n');
                }
                let line = |cols: &[String]| {
                    cols.iter()
                        .enumerate()
                        .map(|(j, c)| format!("{c:<w$}", w = width.get(j).copied().unwrap_or(0)))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_string()
                };
                out.push_str(&line(&self.header));
                out.push('\n');
                for r in &cells {
                    out.push_str(&line(r));
                    out.push('\n');
                }
                Ok(out)
            }
        }
    }
}

/// Writes whitespace-separated series, one point per line and a blank
/// line between series. Each series is preceded by a `# name` comment.
pub fn write_gnuplot(path: &Path, series: &[(String, Vec<Vec<f64>>)]) -> Result<PathBuf> {
    let mut f = fs::File::create(path)?;
    for (i, (name, points)) in series.iter().enumerate() {
        if i > 0 {
            writeln!(f)?;
        }
        writeln!(f, "# {name}")?;
        for p in points {
            let line: Vec<String> = p.iter().map(|v| sig6(*v)).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
    }
    Ok(path.to_path_buf())
}

/// Writes rows of numbers as CSV, unrounded. An empty header is omitted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(sig6(0.0533), "0.0533");
        assert_eq!(sig6(1.000660123), "1.00066");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(-0.000012345678), "-1.23457e-5");
        assert_eq!(sig6(2.0), "2");
        assert_eq!(sig6(999999.7), "1e6");
    }

    #[test]
    fn table_and_csv() {
        let mut t = Table::new("", &["model", "value"]);
        t.push(vec!["normal".into(), 0.1234567891.into()]);
        assert_eq!(t.render(Format::Table).unwrap(), "model   value\nnormal  0.123457\n");
        assert_eq!(t.render(Format::Csv).unwrap(), "model,value\nnormal,0.1234567891\n");
    }

    #[test]
    fn gnuplot_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.dat");
        write_gnuplot(&p, &[("a".into(), vec![vec![1.0, 2.0]]), ("b".into(), vec![vec![3.0, 4.5]])]).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "# a\n1 2\n\n# b\n3 4.5\n");
    }
}
