//! Sample matrices, CSV ingestion and test decisions.

use std::fmt;
use std::path::Path;

use crate::error::{Result, TruhError};

/// An `n_rows x d` matrix of real-valued observations, stored row-major.
/// Rows are samples (cells), columns are markers/dimensions. Entries are
/// validated to be finite at construction; nearest-neighbor distances with
/// NaN are silently wrong, so non-finite input is rejected up front.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n_rows: usize,
    d: usize,
    column_names: Option<Vec<String>>,
}

impl SampleMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, d: usize) -> Result<Self> {
        if n_rows == 0 || d == 0 {
            return Err(TruhError::EmptyInput);
        }
        if data.len() != n_rows * d {
            return Err(TruhError::DimensionMismatch {
                expected: n_rows * d,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(TruhError::Parse {
                row: pos / d + 1,
                col: pos % d + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(SampleMatrix {
            data,
            n_rows,
            d,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(TruhError::EmptyInput);
        }
        let d = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(TruhError::Parse {
                    row: i + 1,
                    col: r.len() + 1,
                    message: format!("ragged row: expected {d} columns"),
                });
            }
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        SampleMatrix::new(data, rows.len(), d)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Self {
        self.column_names = Some(names);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix containing the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<SampleMatrix> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SampleMatrix::new(data, indices.len(), self.d)
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.d];
        for r in self.rows() {
            for (m, x) in means.iter_mut().zip(r) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= self.n_rows as f64;
        }
        means
    }
}

/// Outcome of a calibrated test: observed statistic vs. cutoff at level alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDecision {
    pub statistic: f64,
    pub cutoff: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

impl TestDecision {
    pub fn new(statistic: f64, cutoff: f64, p_value: f64, alpha: f64) -> Self {
        TestDecision {
            statistic,
            cutoff,
            p_value,
            reject: statistic > cutoff,
            alpha,
        }
    }
}

impl fmt::Display for TestDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "statistic={:.6} cutoff={:.6} p={:.4} alpha={} => {}",
            self.statistic,
            self.cutoff,
            self.p_value,
            self.alpha,
            if self.reject { "REJECT" } else { "FAIL TO REJECT" }
        )
    }
}

/// Parses a comma-separated, UTF-8 file into a [`SampleMatrix`].
///
/// Every cell must be a finite decimal or scientific-notation numeral;
/// rows must all have the same column count; no missing values. With
/// `has_header`, the first row becomes the column names.
pub fn load_csv<P: AsRef<Path>>(path: P, has_header: bool) -> Result<SampleMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, has_header)
}

/// CSV parsing on an in-memory string; see [`load_csv`].
pub fn parse_csv(text: &str, has_header: bool) -> Result<SampleMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let mut names: Option<Vec<String>> = None;
    if has_header {
        match lines.next() {
            Some((_, header)) => {
                names = Some(header.split(',').map(|s| s.trim().to_string()).collect());
            }
            None => return Err(TruhError::EmptyInput),
        }
    }

    let mut data = Vec::new();
    let mut d: Option<usize> = None;
    let mut n_rows = 0usize;
    for (lineno, line) in lines {
        n_rows += 1;
        let mut cols = 0usize;
        for (c, cell) in line.split(',').enumerate() {
            cols += 1;
            let v: f64 = cell.trim().parse().map_err(|_| TruhError::Parse {
                row: lineno + 1,
                col: c + 1,
                message: format!("not a number: {:?}", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(TruhError::Parse {
                    row: lineno + 1,
                    col: c + 1,
                    message: "non-finite value".into(),
                });
            }
            data.push(v);
        }
        match d {
            None => {
                if let Some(ref h) = names {
                    if h.len() != cols {
                        return Err(TruhError::Parse {
                            row: lineno + 1,
                            col: cols + 1,
                            message: format!(
                                "row has {cols} columns but header has {}",
                                h.len()
                            ),
                        });
                    }
                }
                d = Some(cols);
            }
            Some(expected) if expected != cols => {
                return Err(TruhError::Parse {
                    row: lineno + 1,
                    col: cols.min(expected) + 1,
                    message: format!("ragged row: expected {expected} columns, got {cols}"),
                });
            }
            _ => {}
        }
    }

    let d = d.ok_or(TruhError::EmptyInput)?;
    let mut m = SampleMatrix::new(data, n_rows, d)?;
    if let Some(h) = names {
        m = m.with_column_names(h);
    }
    Ok(m)
}
