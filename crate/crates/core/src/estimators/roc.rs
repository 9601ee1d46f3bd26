//! Asymptotic rates of convergence and log-odds fitting.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::matrix::{normalize_columns, PositiveMatrix};
use crate::simplex::{kl_divergence_slices, normalize_vector};

/// Lower clamp applied to probabilities before taking log-odds.
pub const LOG_ODDS_FLOOR: f64 = 1e-300;
const LOG_ODDS_CEILING: f64 = 1.0 - 1e-15;

fn require_hypotheses(m: &PositiveMatrix) -> Result<()> {
    if m.cols() < 2 {
        Err(Error::TooFewHypotheses(m.cols()))
    } else {
        Ok(())
    }
}

fn argmin_excluding(values: impl Iterator<Item = (usize, f64)>) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for (j, v) in values {
        if v < best.0 {
            best = (v, j);
        }
    }
    best
}

/// Rate of classical Bayesian inference toward `h`: the smallest KL divergence
/// from column `h` to another column. Columns are normalized first.
pub fn roc_bi(m: &PositiveMatrix, h: usize) -> Result<(f64, usize)> {
    require_hypotheses(m)?;
    check_index(h, m.cols())?;
    let normalized = normalize_columns(m, &vec![1.0; m.cols()])?;
    let target = normalized.column(h);
    let mut rates = Vec::with_capacity(m.cols() - 1);
    for j in (0..m.cols()).filter(|&j| j != h) {
        rates.push((j, kl_divergence_slices(&target, &normalized.column(j))?));
    }
    Ok(argmin_excluding(rates.into_iter()))
}

/// `diag(M[·, h])⁻¹ M` with columns normalized; column `h` is uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpMatrix {
    pub hypothesis: usize,
    pub entries: PositiveMatrix,
}

impl SharpMatrix {
    pub fn new(m: &PositiveMatrix, h: usize) -> Result<Self> {
        check_index(h, m.cols())?;
        let (n, cols) = m.shape();
        let mut data = Vec::with_capacity(n * cols);
        for i in 0..n {
            let pivot = m.get(i, h);
            data.extend(m.row(i).iter().map(|x| x / pivot));
        }
        let divided = PositiveMatrix::from_scaled(n, cols, data)?;
        let mut entries = normalize_columns(&divided, &vec![1.0; cols])?;
        // Column h is exactly uniform; write it so rather than carry rounding.
        entries = entries.with_column(h, &vec![1.0 / n as f64; n])?;
        Ok(Self { hypothesis: h, entries })
    }
}

/// `KL(e/n, 𝒩(other / target))`, the normalized-KL form of the SCBI rate.
pub fn normalized_kl(target: &[f64], other: &[f64]) -> Result<f64> {
    if target.len() != other.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            found: other.len(),
        });
    }
    let n = target.len();
    let ratio: Vec<f64> = other.iter().zip(target).map(|(o, t)| o / t).collect();
    let q = normalize_vector(&ratio, 1.0)?;
    kl_divergence_slices(&vec![1.0 / n as f64; n], &q)
}

/// Rate of cooperative inference toward `h`, with its relevant column and the
/// conditioned matrix.
pub fn roc_scbi(m: &PositiveMatrix, h: usize) -> Result<(f64, usize, SharpMatrix)> {
    require_hypotheses(m)?;
    let sharp = SharpMatrix::new(m, h)?;
    let target = sharp.entries.column(h);
    let mut rates = Vec::with_capacity(m.cols() - 1);
    for j in (0..m.cols()).filter(|&j| j != h) {
        rates.push((j, kl_divergence_slices(&target, &sharp.entries.column(j))?));
    }
    let (rate, argmin) = argmin_excluding(rates.into_iter());
    Ok((rate, argmin, sharp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub per_hypothesis_bi: Vec<f64>,
    pub per_hypothesis_scbi: Vec<f64>,
    /// Minimizing column of the SCBI rate, per hypothesis.
    pub relevant_column: Vec<usize>,
    /// Minimizing column of the BI rate, per hypothesis.
    pub bi_argmin: Vec<usize>,
}

impl RocReport {
    pub fn mean_bi(&self) -> f64 {
        mean(&self.per_hypothesis_bi)
    }

    pub fn mean_scbi(&self) -> f64 {
        mean(&self.per_hypothesis_scbi)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn roc_report(m: &PositiveMatrix) -> Result<RocReport> {
    require_hypotheses(m)?;
    let mut report = RocReport {
        per_hypothesis_bi: Vec::with_capacity(m.cols()),
        per_hypothesis_scbi: Vec::with_capacity(m.cols()),
        relevant_column: Vec::with_capacity(m.cols()),
        bi_argmin: Vec::with_capacity(m.cols()),
    };
    for h in 0..m.cols() {
        let (rb, jb) = roc_bi(m, h)?;
        let (rs, js, _) = roc_scbi(m, h)?;
        report.per_hypothesis_bi.push(rb);
        report.bi_argmin.push(jb);
        report.per_hypothesis_scbi.push(rs);
        report.relevant_column.push(js);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogOddsFit {
    /// `(1/K) · log-odds` at the final round `K`.
    pub endpoint: f64,
    /// Least-squares slope of log-odds against `k` after burn-in.
    pub regression_slope: f64,
    /// Whether any probability had to be clamped.
    pub saturated: bool,
}

/// Fit from `trace[k] = θ_k(h)`, `k = 0..=K`. Probabilities are clamped to
/// `[1e-300, 1 − 1e-15]`; long runs saturate, so prefer
/// [`fit_log_odds_series`] when exact log-odds are available.
pub fn fit_log_odds_slope(trace: &[f64], burn_in: usize) -> Result<LogOddsFit> {
    let mut saturated = false;
    let mut log_odds = Vec::with_capacity(trace.len());
    for &p in trace {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(format!("{p} is not a probability")));
        }
        let clamped = p.clamp(LOG_ODDS_FLOOR, LOG_ODDS_CEILING);
        saturated |= clamped != p;
        log_odds.push((clamped / (1.0 - clamped)).ln());
    }
    let mut fit = fit_log_odds_series(&log_odds, burn_in)?;
    fit.saturated = saturated;
    Ok(fit)
}

/// Fit from exact log-odds `series[k]`, `k = 0..=K`.
pub fn fit_log_odds_series(series: &[f64], burn_in: usize) -> Result<LogOddsFit> {
    if series.len() < burn_in + 2 {
        return Err(Error::InvalidConfig(format!(
            "a trace of length {} leaves no rounds after a burn-in of {burn_in}",
            series.len()
        )));
    }
    let last = series.len() - 1;
    let endpoint = series[last] / last as f64;

    let window = &series[burn_in..];
    let count = window.len() as f64;
    let k_mean = burn_in as f64 + (count - 1.0) / 2.0;
    let y_mean = window.iter().sum::<f64>() / count;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (offset, y) in window.iter().enumerate() {
        let dk = (burn_in + offset) as f64 - k_mean;
        sxy += dk * (y - y_mean);
        sxx += dk * dk;
    }
    Ok(LogOddsFit {
        endpoint,
        regression_slope: sxy / sxx,
        saturated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sample_column_stochastic;
    use crate::seed::rng_from_seed;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn appendix() -> PositiveMatrix {
        PositiveMatrix::from_rows(&[vec![0.75, 0.5], vec![0.25, 0.5]]).unwrap()
    }

    #[test]
    fn two_by_two_rates() {
        let (rb, jb) = roc_bi(&appendix(), 0).unwrap();
        assert_abs_diff_eq!(rb, 0.130812035941137, epsilon = 1e-12);
        assert_eq!(jb, 1);
        let (rs, js, sharp) = roc_scbi(&appendix(), 0).unwrap();
        assert_abs_diff_eq!(rs, 0.143841036225890, epsilon = 1e-12);
        assert_eq!(js, 1);
        assert_abs_diff_eq!(sharp.entries.get(0, 1), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(sharp.entries.get(1, 1), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn two_hypotheses_give_the_two_directed_divergences() {
        let m = appendix();
        let (r1, _) = roc_bi(&m, 1).unwrap();
        let expected = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert_abs_diff_eq!(r1, expected, epsilon = 1e-12);
    }

    #[test]
    fn sharp_column_is_uniform() {
        let mut rng = rng_from_seed(3);
        let m = sample_column_stochastic(4, 3, &mut rng).unwrap();
        let sharp = SharpMatrix::new(&m, 2).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(sharp.entries.get(i, 2), 0.25, epsilon = 1e-12);
        }
        assert!(sharp.entries.is_column_stochastic(1e-12));
    }

    #[test]
    fn both_scbi_formulas_agree() {
        let mut rng = rng_from_seed(11);
        for _ in 0..1000 {
            let m = sample_column_stochastic(4, 3, &mut rng).unwrap();
            for h in 0..3 {
                let (rs, _, _) = roc_scbi(&m, h).unwrap();
                let direct = (0..3)
                    .filter(|&j| j != h)
                    .map(|j| normalized_kl(&m.column(h), &m.column(j)).unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert_abs_diff_eq!(rs, direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rates_vanish_as_columns_merge() {
        let mut last = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001, 0.0001] {
            let m = PositiveMatrix::from_rows(&[vec![0.5, 0.5 + eps], vec![0.5, 0.5 - eps]]).unwrap();
            let (rb, _) = roc_bi(&m, 0).unwrap();
            let (rs, _, _) = roc_scbi(&m, 0).unwrap();
            assert!(rb < last && rs < 10.0 * eps * eps);
            last = rb;
        }
        assert!(last < 1e-7);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        // the two divergences sum identical terms in identical order
        let m = PositiveMatrix::from_rows(&[
            vec![0.4, 0.5, 0.5],
            vec![0.3, 0.3, 0.2],
            vec![0.3, 0.2, 0.3],
        ])
        .unwrap();
        assert_eq!(roc_bi(&m, 0).unwrap().1, 1);
        assert_eq!(argmin_excluding([(2, 0.5), (0, 0.5), (1, 0.7)].into_iter()), (0.5, 2));
    }

    #[test]
    fn one_hypothesis_is_rejected() {
        let m = PositiveMatrix::from_rows(&[vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(roc_bi(&m, 0), Err(Error::TooFewHypotheses(1)));
        assert!(matches!(roc_scbi(&m, 0), Err(Error::TooFewHypotheses(1))));
    }

    #[test]
    fn report_covers_every_hypothesis() {
        let mut rng = rng_from_seed(5);
        let m = sample_column_stochastic(3, 3, &mut rng).unwrap();
        let r = roc_report(&m).unwrap();
        assert_eq!(r.per_hypothesis_bi.len(), 3);
        assert!(r.per_hypothesis_bi.iter().chain(&r.per_hypothesis_scbi).all(|&x| x > 0.0));
        for h in 0..3 {
            assert_ne!(r.relevant_column[h], h);
        }
    }

    #[test]
    fn constant_trace_has_zero_slope() {
        let fit = fit_log_odds_slope(&[0.5; 20], 0).unwrap();
        assert_eq!(fit.endpoint, 0.0);
        assert_abs_diff_eq!(fit.regression_slope, 0.0, epsilon = 1e-15);
        assert!(!fit.saturated);
    }

    #[test]
    fn logistic_trace_recovers_its_rate() {
        let c = 0.37;
        let trace: Vec<f64> = (0..60).map(|k| 1.0 / (1.0 + (-c * k as f64).exp())).collect();
        let fit = fit_log_odds_slope(&trace, 5).unwrap();
        // 1 − p loses digits as p → 1
        assert_relative_eq!(fit.endpoint, c, max_relative = 1e-5);
        assert_relative_eq!(fit.regression_slope, c, max_relative = 1e-5);
    }

    #[test]
    fn saturation_is_flagged() {
        let trace: Vec<f64> = (0..200).map(|k| 1.0 / (1.0 + (-0.5 * k as f64).exp())).collect();
        let fit = fit_log_odds_slope(&trace, 0).unwrap();
        assert!(fit.saturated);
        assert!(fit.endpoint < 0.5);
        let exact: Vec<f64> = (0..200).map(|k| 0.5 * k as f64).collect();
        assert_relative_eq!(fit_log_odds_series(&exact, 0).unwrap().endpoint, 0.5);
    }

    #[test]
    fn short_traces_are_rejected() {
        assert!(fit_log_odds_slope(&[0.5, 0.6], 1).is_err());
        assert!(fit_log_odds_slope(&[0.5, 1.2], 0).is_err());
    }

    proptest! {
        #[test]
        fn rates_ignore_column_rescaling(seed in any::<u64>(), scale in 0.01f64..100.0, j in 0usize..3) {
            let mut rng = rng_from_seed(seed);
            let m = sample_column_stochastic(3, 3, &mut rng).unwrap();
            let mut col = m.column(j);
            col.iter_mut().for_each(|x| *x *= scale);
            let scaled = m.with_column(j, &col).unwrap();
            for h in 0..3 {
                prop_assert!((roc_bi(&m, h).unwrap().0 - roc_bi(&scaled, h).unwrap().0).abs() < 1e-12);
                prop_assert!((roc_scbi(&m, h).unwrap().0 - roc_scbi(&scaled, h).unwrap().0).abs() < 1e-12);
            }
        }
    }
}
