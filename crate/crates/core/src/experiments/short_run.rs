//! Finite-horizon behaviour: exact posterior laws after a few rounds and
//! Monte Carlo estimates after more.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::estimators::{run_episode, EpisodeConfig, Mode};
use crate::matrix::{normalize_columns, sample_column_stochastic, PositiveMatrix};
use crate::measure::{
    check_tree_size, component_std, expectation, mass_in_band, psi_step, AtomicMeasure, Functional,
    TreeOptions,
};
use crate::row;
use crate::seed::{episode_seed, rng_from_seed, task_seed};
use crate::simplex::{LogBelief, ProbabilityVector};

use super::table::Table;

/// Mean and standard deviation of `θ(h)` under some law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Law of the BI posterior after `k` i.i.d. draws from column `h`, summarized
/// on `θ(h)`. Paths are grouped by their count vectors, so the cost is the
/// number of compositions of `k` into `n` parts rather than `nᵏ`.
pub fn bi_exact_moments(m: &PositiveMatrix, h: usize, theta0: &ProbabilityVector, k: usize) -> Result<Moments> {
    check_index(h, m.cols())?;
    let m = normalize_columns(m, &vec![1.0; m.cols()])?;
    let (n, cols) = m.shape();
    let log_m = m.ln_entries();
    let log_prior = LogBelief::from_probability(theta0)?;
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=k).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();

    let mut counts = vec![0usize; n];
    let (mut mean, mut second) = (0.0, 0.0);
    let mut visit = |counts: &[usize]| {
        let mut log_w = ln_fact[k];
        let mut log_post = log_prior.log_probs().to_vec();
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            log_w += c as f64 * log_m[i * cols + h] - ln_fact[c];
            for (j, lp) in log_post.iter_mut().enumerate() {
                *lp += c as f64 * log_m[i * cols + j];
            }
        }
        let p = LogBelief::from_log_weights(log_post).prob(h);
        let w = log_w.exp();
        mean += w * p;
        second += w * p * p;
    };
    compositions(k, 0, &mut counts, &mut visit);
    Ok(Moments {
        mean,
        std: (second - mean * mean).max(0.0).sqrt(),
    })
}

fn compositions(remaining: usize, index: usize, counts: &mut [usize], visit: &mut impl FnMut(&[usize])) {
    if index == counts.len() - 1 {
        counts[index] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[index] = c;
        compositions(remaining - c, index + 1, counts, visit);
    }
}

/// Exact SCBI law after `k` rounds, summarized on `θ(h)`.
pub fn scbi_exact_moments(
    m: &PositiveMatrix,
    h: usize,
    theta0: &ProbabilityVector,
    k: usize,
    options: &TreeOptions,
) -> Result<Moments> {
    let mu = crate::measure::exact_distribution_with(m, h, theta0, k, options)?;
    Ok(Moments {
        mean: expectation(&mu, Functional::Component(h))?,
        std: component_std(&mu, h)?,
    })
}

/// Empirical moments of the learner's `θ(h)` after `rounds` rounds over
/// `episodes` seeded episodes (episode `e` uses `base ⊕ e`).
pub fn monte_carlo_moments(
    m: &PositiveMatrix,
    h: usize,
    theta0: &ProbabilityVector,
    mode: Mode,
    rounds: usize,
    episodes: usize,
    base: u64,
) -> Result<Moments> {
    if episodes == 0 {
        return Ok(Moments { mean: f64::NAN, std: f64::NAN });
    }
    let cfg = EpisodeConfig::matched(m.clone(), theta0.clone(), h, rounds, mode, base);
    let finals = (0..episodes as u64)
        .into_par_iter()
        .map(|e| {
            let cfg = EpisodeConfig { seed: episode_seed(base, e), ..cfg.clone() };
            let trace = run_episode(&cfg)?;
            Ok(trace.learner_posteriors.last().expect("prior is recorded").get(h))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(Moments { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortRunConfig {
    pub rows: usize,
    pub cols: usize,
    pub matrices: usize,
    pub exact_rounds: usize,
    pub mc_rounds: usize,
    /// Zero skips the Monte Carlo columns.
    pub mc_episodes: usize,
    pub hypothesis: usize,
    pub seed: u64,
    pub atom_cap: u128,
}

impl Default for ShortRunConfig {
    fn default() -> Self {
        Self {
            rows: 10,
            cols: 10,
            matrices: 30,
            exact_rounds: 4,
            mc_rounds: 30,
            mc_episodes: 0,
            hypothesis: 0,
            seed: 0,
            atom_cap: crate::measure::DEFAULT_ATOM_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortRunRow {
    pub matrix: usize,
    pub matrix_seed: u64,
    pub bi_exact: Moments,
    pub scbi_exact: Moments,
    pub bi_mc: Moments,
    pub scbi_mc: Moments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortRunResult {
    pub rows: Vec<ShortRunRow>,
    /// Fraction of matrices whose exact SCBI mean exceeds the BI mean.
    pub scbi_above_bi: f64,
}

/// Matrix `i` is drawn from `task_seed(seed, 2i)`; its Monte Carlo episodes
/// use base seed `task_seed(seed, 2i + 1)`. The prior is uniform.
pub fn short_run_stats(cfg: &ShortRunConfig) -> Result<ShortRunResult> {
    if cfg.matrices == 0 {
        return Err(Error::InvalidConfig("at least one matrix is required".into()));
    }
    check_index(cfg.hypothesis, cfg.cols)?;
    check_tree_size(cfg.rows, cfg.exact_rounds, cfg.atom_cap)?;
    let theta0 = ProbabilityVector::uniform(cfg.cols);
    let options = TreeOptions { atom_cap: cfg.atom_cap, merge_tolerance: None };
    let rows = (0..cfg.matrices)
        .into_par_iter()
        .map(|i| {
            let matrix_seed = task_seed(cfg.seed, 2 * i as u64);
            let mc_seed = task_seed(cfg.seed, 2 * i as u64 + 1);
            let m = sample_column_stochastic(cfg.rows, cfg.cols, &mut rng_from_seed(matrix_seed))?;
            let h = cfg.hypothesis;
            Ok(ShortRunRow {
                matrix: i,
                matrix_seed,
                bi_exact: bi_exact_moments(&m, h, &theta0, cfg.exact_rounds)?,
                scbi_exact: scbi_exact_moments(&m, h, &theta0, cfg.exact_rounds, &options)?,
                bi_mc: monte_carlo_moments(&m, h, &theta0, Mode::Bi, cfg.mc_rounds, cfg.mc_episodes, mc_seed)?,
                scbi_mc: monte_carlo_moments(&m, h, &theta0, Mode::Scbi, cfg.mc_rounds, cfg.mc_episodes, mc_seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let above = rows.iter().filter(|r| r.scbi_exact.mean > r.bi_exact.mean).count();
    Ok(ShortRunResult {
        scbi_above_bi: above as f64 / rows.len() as f64,
        rows,
    })
}

impl ShortRunResult {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "matrix",
            "matrix_seed",
            "bi_exact_mean",
            "bi_exact_std",
            "scbi_exact_mean",
            "scbi_exact_std",
            "bi_mc_mean",
            "bi_mc_std",
            "scbi_mc_mean",
            "scbi_mc_std",
        ]);
        for r in &self.rows {
            t.push(row![
                r.matrix,
                r.matrix_seed,
                r.bi_exact.mean,
                r.bi_exact.std,
                r.scbi_exact.mean,
                r.scbi_exact.std,
                r.bi_mc.mean,
                r.bi_mc.std,
                r.scbi_mc.mean,
                r.scbi_mc.std,
            ]);
        }
        t
    }
}

/// Round-by-round statistics of `Ψ(h)ᵏ δ_θ₀` for `k = 0..=rounds`.
pub fn exact_tree_stats(
    m: &PositiveMatrix,
    h: usize,
    theta0: &ProbabilityVector,
    rounds: usize,
    options: &TreeOptions,
) -> Result<Table> {
    check_index(h, m.cols())?;
    check_tree_size(m.rows(), rounds, options.atom_cap)?;
    let others: Vec<usize> = (0..m.cols()).filter(|&j| j != h).collect();
    let mut header: Vec<String> = ["round", "atoms", "mean_theta_h", "std_theta_h", "mass_0.2_0.8"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(others.iter().map(|j| format!("mean_ratio_{}", j + 1)));
    let mut t = Table::new(&header);
    let mut mu = AtomicMeasure::dirac(theta0.clone());
    for k in 0..=rounds {
        if k > 0 {
            mu = psi_step(m, h, &mu)?;
            if let Some(tol) = options.merge_tolerance {
                mu = mu.merged(tol);
            }
        }
        let mut r = row![
            k,
            mu.len(),
            expectation(&mu, Functional::Component(h))?,
            component_std(&mu, h)?,
            mass_in_band(&mu, h, 0.2, 0.8),
        ];
        for &j in &others {
            r.push(expectation(&mu, Functional::Ratio { numerator: j, denominator: h })?.into());
        }
        t.push(r);
    }
    Ok(t)
}
