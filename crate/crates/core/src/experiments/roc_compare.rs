//! Sample efficiency over random column-stochastic matrices: how often, and
//! by how much, the cooperative rate beats the Bayesian one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{roc_bi, roc_scbi};
use crate::matrix::{sample_column_stochastic, PositiveMatrix};
use crate::row;
use crate::seed::{rng_from_seed, task_seed};
use crate::simplex::sample_simplex_uniform;

use super::table::Table;

/// Matrices drawn from one RNG stream. Chunking fixes the random streams
/// independently of the thread count.
pub const CHUNK: usize = 2048;

/// Reported for `−ln(1 − 𝔓)` when every sample favoured SCBI.
pub const SATURATED_SENTINEL: f64 = f64::INFINITY;

/// Proportion and mean difference under one averaging convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Fraction of matrices with SCBI rate ≥ BI rate.
    pub p_hat: f64,
    /// Mean of SCBI rate − BI rate.
    pub e_hat: f64,
    pub p_std_error: f64,
    pub e_std_error: f64,
    /// `−ln(1 − p_hat)`, or the sentinel when `p_hat = 1`.
    pub neg_log_complement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocComparisonResult {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub seed: u64,
    /// Rates averaged over all hypotheses before comparing.
    pub averaged: Comparison,
    /// Rates toward the first hypothesis only.
    pub first_hypothesis: Comparison,
}

#[derive(Default, Clone, Copy)]
struct Moments {
    wins: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn add(&mut self, diff: f64) {
        self.wins += usize::from(diff >= 0.0);
        self.sum += diff;
        self.sum_sq += diff * diff;
    }

    fn merge(&mut self, other: &Moments) {
        self.wins += other.wins;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn finish(&self, n: usize) -> Comparison {
        let nf = n as f64;
        let p = self.wins as f64 / nf;
        let mean = self.sum / nf;
        let var = if n > 1 {
            ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Comparison {
            p_hat: p,
            e_hat: mean,
            p_std_error: (p * (1.0 - p) / nf).sqrt(),
            e_std_error: (var / nf).sqrt(),
            neg_log_complement: if p >= 1.0 { SATURATED_SENTINEL } else { -(1.0 - p).ln() },
        }
    }
}

/// SCBI minus BI rate, averaged over hypotheses and toward hypothesis 0.
pub fn rate_differences(m: &PositiveMatrix) -> Result<(f64, f64)> {
    let cols = m.cols();
    let mut avg = 0.0;
    let mut first = 0.0;
    for h in 0..cols {
        let d = roc_scbi(m, h)?.0 - roc_bi(m, h)?.0;
        avg += d;
        if h == 0 {
            first = d;
        }
    }
    Ok((avg / cols as f64, first))
}

/// Estimate 𝔓 and 𝔈 from `samples` uniformly drawn `rows × cols`
/// column-stochastic matrices. Chunk `c` draws from `task_seed(seed, c)`.
pub fn roc_comparison(rows: usize, cols: usize, samples: usize, seed: u64) -> Result<RocComparisonResult> {
    if !(rows >= cols && cols >= 2) {
        return Err(Error::InvalidConfig(format!("need rows ≥ cols ≥ 2, got {rows}x{cols}")));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("at least one sample is required".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(task_seed(seed, c as u64));
            let count = CHUNK.min(samples - c * CHUNK);
            let (mut avg, mut first) = (Moments::default(), Moments::default());
            for _ in 0..count {
                let m = sample_column_stochastic(rows, cols, &mut rng)?;
                let (a, f) = rate_differences(&m)?;
                avg.add(a);
                first.add(f);
            }
            Ok((avg, first))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut avg, mut first) = (Moments::default(), Moments::default());
    for (a, f) in &partials {
        avg.merge(a);
        first.merge(f);
    }
    Ok(RocComparisonResult {
        rows,
        cols,
        samples,
        seed,
        averaged: avg.finish(samples),
        first_hypothesis: first.finish(samples),
    })
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn chunked_mean<F>(samples: usize, seed: u64, draw: F) -> Result<Estimate>
where
    F: Fn(&mut crate::seed::SimRng) -> Result<f64> + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidConfig("at least two samples are required".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_from_seed(task_seed(seed, c as u64));
            let mut m = Moments::default();
            for _ in 0..CHUNK.min(samples - c * CHUNK) {
                m.add(draw(&mut rng)?);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Moments::default();
    partials.iter().for_each(|p| total.merge(p));
    let c = total.finish(samples);
    Ok(Estimate {
        value: c.e_hat,
        std_error: c.e_std_error,
    })
}

/// 𝔈 for two-column matrices with `n` rows via the reduction
/// `E[ln Σᵢ xᵢ/yᵢ] − ln n − (n − 1)/n`, `x, y` uniform on the simplex.
/// Only the expectation is estimated by Monte Carlo.
pub fn e_closed_form_two_column(n: usize, samples: usize, seed: u64) -> Result<Estimate> {
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two rows".into()));
    }
    let integral = chunked_mean(samples, seed, |rng| {
        let x = sample_simplex_uniform(n, rng)?;
        let y = sample_simplex_uniform(n, rng)?;
        Ok(x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a / b).sum::<f64>().ln())
    })?;
    let nf = n as f64;
    Ok(Estimate {
        value: integral.value - nf.ln() - (nf - 1.0) / nf,
        std_error: integral.std_error,
    })
}

/// Monte Carlo estimate of the mean BI rate, averaged over both hypotheses,
/// for `n × 2` matrices. Its exact value is `(n − 1)/n`.
pub fn bi_average_two_column(n: usize, samples: usize, seed: u64) -> Result<Estimate> {
    chunked_mean(samples, seed, |rng| {
        let m = sample_column_stochastic(n, 2, rng)?;
        Ok(0.5 * (roc_bi(&m, 0)?.0 + roc_bi(&m, 1)?.0))
    })
}

pub const COMPARISON_HEADER: [&str; 15] = [
    "rows",
    "cols",
    "samples",
    "seed",
    "p_hat_avg",
    "p_std_error_avg",
    "e_hat_avg",
    "e_std_error_avg",
    "neg_log_one_minus_p_avg",
    "p_hat_h1",
    "p_std_error_h1",
    "e_hat_h1",
    "e_std_error_h1",
    "neg_log_one_minus_p_h1",
    "p_saturated_avg",
];

pub fn comparison_table(results: &[RocComparisonResult]) -> Table {
    let mut t = Table::new(&COMPARISON_HEADER);
    for r in results {
        let (a, f) = (&r.averaged, &r.first_hypothesis);
        t.push(row![
            r.rows,
            r.cols,
            r.samples,
            r.seed,
            a.p_hat,
            a.p_std_error,
            a.e_hat,
            a.e_std_error,
            a.neg_log_complement,
            f.p_hat,
            f.p_std_error,
            f.e_hat,
            f.e_std_error,
            f.neg_log_complement,
            a.p_hat >= 1.0,
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_errors_respect_the_binomial_bound() {
        let r = roc_comparison(3, 2, 3000, 1).unwrap();
        for c in [r.averaged, r.first_hypothesis] {
            assert!((0.0..=1.0).contains(&c.p_hat));
            assert!(c.p_std_error <= 1.0 / (3000f64).sqrt());
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| roc_comparison(4, 3, 5000, 9)).unwrap();
        let b = many.install(|| roc_comparison(4, 3, 5000, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sentinel_when_every_sample_favours_scbi() {
        let mut m = Moments::default();
        m.add(0.1);
        m.add(0.2);
        assert_eq!(m.finish(2).neg_log_complement, SATURATED_SENTINEL);
        m.add(-0.1);
        assert!((m.finish(3).neg_log_complement - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bi_average_matches_its_exact_value() {
        let est = bi_average_two_column(3, 200_000, 4).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 0.01 * 2.0 / 3.0, "{est:?}");
    }

    #[test]
    fn shape_is_validated() {
        assert!(roc_comparison(2, 3, 10, 0).is_err());
        assert!(roc_comparison(3, 1, 10, 0).is_err());
        assert!(e_closed_form_two_column(1, 10, 0).is_err());
    }
}
