//! Strictly positive likelihood matrices and their row/column normalizations.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::experiments::table::format_float;
use crate::simplex::{sample_simplex_uniform, ProbabilityVector};

/// Pairwise L∞ distance below which two normalized columns count as parallel.
pub const DISTINGUISHABLE_TOLERANCE: f64 = 1e-12;

/// An `n × m` matrix of strictly positive entries with `n ≥ m` and no two
/// columns parallel. Rows index data, columns index hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PositiveMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PositiveMatrix {
    /// Row-major constructor enforcing every type invariant.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let m = Self::new_unchecked_shape(rows, cols, data)?;
        if rows < cols {
            return Err(Error::InvalidMatrix(format!(
                "fewer data than hypotheses ({rows} rows < {cols} columns)"
            )));
        }
        if let Some((i, j)) = m.parallel_columns() {
            return Err(Error::InvalidMatrix(format!(
                "columns {i} and {j} are parallel (hypotheses not distinguishable)"
            )));
        }
        Ok(m)
    }

    fn new_unchecked_shape(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) = {} is not strictly positive",
                k / cols,
                k % cols,
                data[k]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: bad.len(),
            });
        }
        Self::new(n, m, rows.concat())
    }

    /// Build from columns, each of length `n`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let m = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for c in columns {
                data.push(c[i]);
            }
        }
        Self::new(n, m, data)
    }

    /// Diagonal rescalings and Sinkhorn limits keep positivity, shape and
    /// non-parallel columns; only positivity can fail, through underflow.
    pub(crate) fn from_scaled(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Underflow(
                "scaled matrix has an entry outside (0, inf)".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, x) in sums.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        sums
    }

    /// Column `j` normalized onto the simplex.
    pub fn column_distribution(&self, j: usize) -> Result<ProbabilityVector> {
        check_index(j, self.cols)?;
        ProbabilityVector::from_weights(&self.column(j))
    }

    pub fn is_column_stochastic(&self, tol: f64) -> bool {
        self.col_sums().iter().all(|s| (s - 1.0).abs() <= tol)
    }

    /// `M[i,j]·M[i',j'] / (M[i,j']·M[i',j])`.
    pub fn cross_ratio(&self, i: usize, i2: usize, j: usize, j2: usize) -> f64 {
        (self.get(i, j) * self.get(i2, j2)) / (self.get(i, j2) * self.get(i2, j))
    }

    /// Every cross-ratio over pairs `i < i'`, `j < j'`, in a fixed order.
    pub fn cross_ratios(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for i2 in i + 1..self.rows {
                for j in 0..self.cols {
                    for j2 in j + 1..self.cols {
                        out.push(self.cross_ratio(i, i2, j, j2));
                    }
                }
            }
        }
        out
    }

    /// First pair of columns whose normalizations agree within
    /// [`DISTINGUISHABLE_TOLERANCE`] in L∞.
    pub fn parallel_columns(&self) -> Option<(usize, usize)> {
        let normalized: Vec<Vec<f64>> = (0..self.cols)
            .map(|j| {
                let c = self.column(j);
                let s: f64 = c.iter().sum();
                c.into_iter().map(|x| x / s).collect()
            })
            .collect();
        for a in 0..self.cols {
            for b in a + 1..self.cols {
                let dist = normalized[a]
                    .iter()
                    .zip(&normalized[b])
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if dist <= DISTINGUISHABLE_TOLERANCE {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Copy with column `j` replaced.
    pub fn with_column(&self, j: usize, column: &[f64]) -> Result<Self> {
        check_index(j, self.cols)?;
        if column.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: column.len(),
            });
        }
        let mut data = self.data.clone();
        for (i, x) in column.iter().enumerate() {
            data[i * self.cols + j] = *x;
        }
        Self::new(self.rows, self.cols, data)
    }

    /// Entrywise natural logarithm, row-major.
    pub fn ln_entries(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.ln()).collect()
    }

    /// Parse plain comma-separated rows, one per line, no header. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {line}: {tok:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_csv(&text)
    }
}

impl TryFrom<Vec<Vec<f64>>> for PositiveMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<PositiveMatrix> for Vec<Vec<f64>> {
    fn from(m: PositiveMatrix) -> Self {
        m.to_rows()
    }
}

impl fmt::Display for PositiveMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|&x| format_float(x)).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Prescribed row sums `r` (length n) and column sums `c` (length m).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSpec {
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
}

impl MarginalSpec {
    /// Totals must agree to within 1e-9, relative to the total once it exceeds one.
    pub fn new(row_sums: Vec<f64>, col_sums: Vec<f64>) -> Result<Self> {
        if row_sums.is_empty() || col_sums.is_empty() {
            return Err(Error::InvalidConfig("empty marginal".into()));
        }
        if row_sums
            .iter()
            .chain(&col_sums)
            .any(|x| !(x.is_finite() && *x > 0.0))
        {
            return Err(Error::InvalidConfig("marginals must be positive and finite".into()));
        }
        let row_total: f64 = row_sums.iter().sum();
        let col_total: f64 = col_sums.iter().sum();
        if (row_total - col_total).abs() > 1e-9 * row_total.max(1.0) {
            return Err(Error::MarginalMismatch {
                row_total,
                col_total,
            });
        }
        Ok(Self { row_sums, col_sums })
    }

    /// `r = e_n`, `c = nθ`: the marginals of one cooperative round.
    pub fn cooperative(theta: &ProbabilityVector, rows: usize) -> Result<Self> {
        theta.require_interior()?;
        let n = rows as f64;
        let c = theta.renormalized().as_slice().iter().map(|t| n * t).collect();
        Self::new(vec![1.0; rows], c)
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }
}

/// Scale each column `j` to sum to `targets[j]`.
pub fn normalize_columns(m: &PositiveMatrix, targets: &[f64]) -> Result<PositiveMatrix> {
    if targets.len() != m.cols {
        return Err(Error::DimensionMismatch {
            expected: m.cols,
            found: targets.len(),
        });
    }
    if targets.iter().any(|t| t.is_nan() || *t <= 0.0) {
        return Err(Error::InvalidConfig("column targets must be positive".into()));
    }
    let sums = m.col_sums();
    let mut data = m.data.clone();
    for row in data.chunks_mut(m.cols) {
        for ((x, s), t) in row.iter_mut().zip(&sums).zip(targets) {
            *x *= t / s;
        }
    }
    PositiveMatrix::from_scaled(m.rows, m.cols, data)
}

/// Scale each row `i` to sum to `targets[i]`.
pub fn normalize_rows(m: &PositiveMatrix, targets: &[f64]) -> Result<PositiveMatrix> {
    if targets.len() != m.rows {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            found: targets.len(),
        });
    }
    if targets.iter().any(|t| t.is_nan() || *t <= 0.0) {
        return Err(Error::InvalidConfig("row targets must be positive".into()));
    }
    let mut data = m.data.clone();
    for (row, t) in data.chunks_mut(m.cols).zip(targets) {
        let s: f64 = row.iter().sum();
        let k = t / s;
        row.iter_mut().for_each(|x| *x *= k);
    }
    PositiveMatrix::from_scaled(m.rows, m.cols, data)
}

/// Column-stochastic matrix whose columns are independent uniform simplex draws.
pub fn sample_column_stochastic<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<PositiveMatrix> {
    if cols < 2 || rows < cols {
        return Err(Error::InvalidConfig(format!(
            "need rows >= cols >= 2, got {rows}x{cols}"
        )));
    }
    loop {
        let columns = (0..cols)
            .map(|_| sample_simplex_uniform(rows, rng).map(ProbabilityVector::into_vec))
            .collect::<Result<Vec<_>>>()?;
        match PositiveMatrix::from_columns(&columns) {
            Ok(m) => return Ok(m),
            // parallel columns: measure zero, redraw
            Err(Error::InvalidMatrix(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}
