//! (r, c)-Sinkhorn scaling: alternate row and column normalization until the
//! row marginals, measured right after a column step, are within tolerance.
//!
//! Two engines iterate the same recursion. [`sinkhorn_scale`] works on the
//! matrix entries directly. [`LogKernel`] keeps only the logarithms of the two
//! diagonal scalings, which is what cooperative rounds need once a posterior
//! component drops below the smallest positive `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, normalize_rows, MarginalSpec, PositiveMatrix};
use crate::simplex::{log_sum_exp, ProbabilityVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    /// Bound on the L∞ deviation of row sums from their targets.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 10_000,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(format!(
                "sinkhorn needs tolerance > 0 and max_iterations >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    pub scaled: PositiveMatrix,
    pub iterations: usize,
    pub final_error: f64,
}

fn marginal_error(m: &PositiveMatrix, targets: &[f64]) -> f64 {
    m.row_sums()
        .iter()
        .zip(targets)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max)
}

fn check_shape(m: &PositiveMatrix, marginals: &MarginalSpec) -> Result<()> {
    if marginals.row_sums().len() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: marginals.row_sums().len(),
        });
    }
    if marginals.col_sums().len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            found: marginals.col_sums().len(),
        });
    }
    Ok(())
}

/// Scale `m` to the marginals `(r, c)`.
pub fn sinkhorn_scale(
    m: &PositiveMatrix,
    marginals: &MarginalSpec,
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult> {
    sinkhorn_scale_traced(m, marginals, cfg).map(|(result, _)| result)
}

/// As [`sinkhorn_scale`], also returning the L1 row-marginal deviation after
/// every iteration.
pub fn sinkhorn_scale_traced(
    m: &PositiveMatrix,
    marginals: &MarginalSpec,
    cfg: &SinkhornConfig,
) -> Result<(SinkhornResult, Vec<f64>)> {
    cfg.validate()?;
    check_shape(m, marginals)?;
    let r = marginals.row_sums();
    let c = marginals.col_sums();

    let col_error = m
        .col_sums()
        .iter()
        .zip(c)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max);
    let row_error = marginal_error(m, r);
    if col_error <= cfg.tolerance && row_error <= cfg.tolerance {
        let result = SinkhornResult {
            scaled: m.clone(),
            iterations: 0,
            final_error: row_error,
        };
        return Ok((result, Vec::new()));
    }

    let mut current = m.clone();
    let mut trace = Vec::new();
    let mut final_error = f64::INFINITY;
    for iteration in 1..=cfg.max_iterations {
        current = normalize_rows(&current, r)?;
        current = normalize_columns(&current, c)?;
        let sums = current.row_sums();
        final_error = sums
            .iter()
            .zip(r)
            .map(|(s, t)| (s - t).abs())
            .fold(0.0, f64::max);
        trace.push(sums.iter().zip(r).map(|(s, t)| (s - t).abs()).sum());
        if final_error <= cfg.tolerance {
            let result = SinkhornResult {
                scaled: current,
                iterations: iteration,
                final_error,
            };
            return Ok((result, trace));
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        final_error,
    })
}

/// `M^⟨nθ⟩`: rows scaled to one, column `j` to `n·θ(j)`.
pub fn scbi_scaled(m: &PositiveMatrix, theta: &ProbabilityVector) -> Result<PositiveMatrix> {
    if theta.dim() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            found: theta.dim(),
        });
    }
    let marginals = MarginalSpec::cooperative(theta, m.rows())?;
    Ok(sinkhorn_scale(m, &marginals, &SinkhornConfig::default())?.scaled)
}

/// True iff `t = E₁·l·E₂` for positive diagonals, decided by agreement of all
/// 2×2 cross-ratios within 1e-9 relative error.
pub fn scale_equivalence_check(t: &PositiveMatrix, l: &PositiveMatrix) -> bool {
    if t.shape() != l.shape() {
        return false;
    }
    t.cross_ratios()
        .iter()
        .zip(l.cross_ratios())
        .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()))
}

/// Logarithms of the diagonal scalings `D₁`, `D₂` of a converged Sinkhorn
/// limit `D₁·M·D₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogScaling {
    pub log_row: Vec<f64>,
    pub log_col: Vec<f64>,
    pub iterations: usize,
    pub final_error: f64,
}

/// A positive matrix prepared for repeated log-domain scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct LogKernel {
    rows: usize,
    cols: usize,
    log_entries: Vec<f64>,
}

impl LogKernel {
    pub fn new(m: &PositiveMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            log_entries: m.ln_entries(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn log_entry(&self, i: usize, j: usize) -> f64 {
        self.log_entries[i * self.cols + j]
    }

    /// Scale to `exp(log_r)`, `exp(log_c)`. Starting from the unscaled matrix
    /// this produces the same iterates as [`sinkhorn_scale`]; the stopping rule
    /// is the same L∞ row-sum deviation.
    pub fn scale(&self, log_r: &[f64], log_c: &[f64], cfg: &SinkhornConfig) -> Result<LogScaling> {
        if log_r.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: log_r.len(),
            });
        }
        if log_c.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: log_c.len(),
            });
        }
        let (n, m) = (self.rows, self.cols);
        let mut log_col = vec![0.0; m];
        let mut log_row = vec![0.0; n];
        let mut row_lse = vec![0.0; n];
        let mut buf = vec![0.0; n.max(m)];

        let row_pass = |log_col: &[f64], row_lse: &mut [f64], buf: &mut [f64]| {
            for i in 0..n {
                let base = i * m;
                for j in 0..m {
                    buf[j] = self.log_entries[base + j] + log_col[j];
                }
                row_lse[i] = log_sum_exp(&buf[..m]);
            }
        };

        row_pass(&log_col, &mut row_lse, &mut buf);
        let mut final_error = f64::INFINITY;
        for iteration in 1..=cfg.max_iterations {
            for i in 0..n {
                log_row[i] = log_r[i] - row_lse[i];
            }
            for j in 0..m {
                for i in 0..n {
                    buf[i] = self.log_entries[i * m + j] + log_row[i];
                }
                log_col[j] = log_c[j] - log_sum_exp(&buf[..n]);
            }
            // Row sums after the column step are exp(log_row + row_lse); the
            // same sums drive the next row step.
            row_pass(&log_col, &mut row_lse, &mut buf);
            final_error = (0..n)
                .map(|i| ((log_row[i] + row_lse[i]).exp() - log_r[i].exp()).abs())
                .fold(0.0, f64::max);
            if final_error <= cfg.tolerance {
                return Ok(LogScaling {
                    log_row,
                    log_col,
                    iterations: iteration,
                    final_error,
                });
            }
        }
        Err(Error::NonConvergence {
            iterations: cfg.max_iterations,
            final_error,
        })
    }

    /// `ln` of entry `(i, j)` of the scaled matrix.
    pub fn scaled_log_entry(&self, s: &LogScaling, i: usize, j: usize) -> f64 {
        s.log_row[i] + self.log_entry(i, j) + s.log_col[j]
    }
}
