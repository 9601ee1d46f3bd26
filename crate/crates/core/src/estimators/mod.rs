//! Teacher and learner update rules for classical Bayesian inference (BI) and
//! sequential cooperative inference (SCBI).
//!
//! The free functions take and return [`ProbabilityVector`]s. Episodes use the
//! kernels ([`BiKernel`], [`ScbiKernel`]), which evolve a [`LogBelief`] so that
//! posteriors remain exact after thousands of rounds.

mod episode;
mod roc;

pub use episode::{
    run_episode, run_episode_forced, run_episode_with_rng, sample_index, EpisodeConfig,
    EpisodeRunner, EpisodeTrace, Mode,
};
pub use roc::{
    fit_log_odds_series, fit_log_odds_slope, normalized_kl, roc_bi, roc_report, roc_scbi,
    LogOddsFit, RocReport, SharpMatrix, LOG_ODDS_FLOOR,
};

use crate::error::{check_index, Error, Result};
use crate::matrix::PositiveMatrix;
use crate::simplex::{log_sum_exp, normalize_vector, LogBelief, ProbabilityVector};
use crate::sinkhorn::{LogKernel, LogScaling, SinkhornConfig};

/// Column-sum tolerance for matrices used as fixed Bayes likelihoods.
pub const COLUMN_STOCHASTIC_TOLERANCE: f64 = 1e-9;

fn require_column_stochastic(m: &PositiveMatrix) -> Result<()> {
    if m.is_column_stochastic(COLUMN_STOCHASTIC_TOLERANCE) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(
            "a Bayes likelihood must be column-stochastic".into(),
        ))
    }
}

fn check_prior(m: &PositiveMatrix, theta: &ProbabilityVector) -> Result<()> {
    if theta.dim() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            found: theta.dim(),
        });
    }
    theta.require_interior()
}

/// The BI teacher samples i.i.d. from column `h`.
pub fn bi_teacher_distribution(m: &PositiveMatrix, h: usize) -> Result<ProbabilityVector> {
    require_column_stochastic(m)?;
    check_index(h, m.cols())?;
    m.column_distribution(h)
}

/// Bayes' rule: `θ ↦ 𝒩(M[d, ·] ∘ θ)`.
pub fn bi_update(m: &PositiveMatrix, theta: &ProbabilityVector, d: usize) -> Result<ProbabilityVector> {
    require_column_stochastic(m)?;
    check_prior(m, theta)?;
    check_index(d, m.rows())?;
    let weights: Vec<f64> = m
        .row(d)
        .iter()
        .zip(theta.as_slice())
        .map(|(l, t)| l * t)
        .collect();
    ProbabilityVector::new(normalize_vector(&weights, 1.0)?)
}

/// Teaching distribution `τ(θ) = M^⟨nθ⟩[·, h] / (nθ(h))`.
pub fn scbi_teacher_distribution(
    m: &PositiveMatrix,
    theta: &ProbabilityVector,
    h: usize,
) -> Result<ProbabilityVector> {
    check_prior(m, theta)?;
    check_index(h, m.cols())?;
    let kernel = ScbiKernel::new(m);
    let round = kernel.round(&LogBelief::from_probability(theta)?)?;
    Ok(round.teaching_distribution(h))
}

/// Cooperative posterior: row `d` of `M^⟨nθ⟩`.
pub fn scbi_update(m: &PositiveMatrix, theta: &ProbabilityVector, d: usize) -> Result<ProbabilityVector> {
    check_prior(m, theta)?;
    check_index(d, m.rows())?;
    let kernel = ScbiKernel::new(m);
    let round = kernel.round(&LogBelief::from_probability(theta)?)?;
    Ok(round.posterior(d).to_probability())
}

/// A fixed Bayes likelihood in log form.
#[derive(Debug, Clone)]
pub struct BiKernel {
    rows: usize,
    cols: usize,
    log_entries: Vec<f64>,
}

impl BiKernel {
    pub fn new(m: &PositiveMatrix) -> Result<Self> {
        require_column_stochastic(m)?;
        Ok(Self {
            rows: m.rows(),
            cols: m.cols(),
            log_entries: m.ln_entries(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn update(&self, belief: &LogBelief, d: usize) -> LogBelief {
        let row = &self.log_entries[d * self.cols..(d + 1) * self.cols];
        LogBelief::from_log_weights(belief.log_probs().iter().zip(row).map(|(a, b)| a + b).collect())
    }

    /// Column `h` as a distribution over data.
    pub fn teaching_distribution(&self, h: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.log_entries[i * self.cols + h].exp())
            .collect()
    }
}

/// A positive matrix prepared for cooperative rounds.
#[derive(Debug, Clone)]
pub struct ScbiKernel {
    kernel: LogKernel,
    config: SinkhornConfig,
}

impl ScbiKernel {
    pub fn new(m: &PositiveMatrix) -> Self {
        Self::with_config(m, SinkhornConfig::default())
    }

    pub fn with_config(m: &PositiveMatrix, config: SinkhornConfig) -> Self {
        Self {
            kernel: LogKernel::new(m),
            config,
        }
    }

    pub fn rows(&self) -> usize {
        self.kernel.rows()
    }

    pub fn cols(&self) -> usize {
        self.kernel.cols()
    }

    /// Scale to `r = e_n`, `c = nθ` for the prior `belief`.
    pub fn round(&self, belief: &LogBelief) -> Result<ScbiRound<'_>> {
        if belief.dim() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                found: belief.dim(),
            });
        }
        if let Some(index) = belief.log_probs().iter().position(|x| !x.is_finite()) {
            return Err(Error::BoundaryPrior { index });
        }
        let ln_n = (self.rows() as f64).ln();
        let log_c: Vec<f64> = belief.log_probs().iter().map(|t| ln_n + t).collect();
        let scaling = self
            .kernel
            .scale(&vec![0.0; self.rows()], &log_c, &self.config)?;
        Ok(ScbiRound {
            kernel: &self.kernel,
            prior: belief.clone(),
            scaling,
        })
    }
}

/// One converged cooperative scaling `M^⟨nθ⟩`, from which both the teacher's
/// sampling distribution and every possible posterior are read off.
#[derive(Debug, Clone)]
pub struct ScbiRound<'a> {
    kernel: &'a LogKernel,
    prior: LogBelief,
    scaling: LogScaling,
}

impl ScbiRound<'_> {
    pub fn iterations(&self) -> usize {
        self.scaling.iterations
    }

    pub fn log_teaching_weights(&self, h: usize) -> Vec<f64> {
        let offset = (self.kernel.rows() as f64).ln() + self.prior.log_probs()[h];
        (0..self.kernel.rows())
            .map(|i| self.kernel.scaled_log_entry(&self.scaling, i, h) - offset)
            .collect()
    }

    /// `τ(θ)` for hypothesis `h`, renormalized to absorb the scaling residual.
    pub fn teaching_distribution(&self, h: usize) -> ProbabilityVector {
        let log_w = self.log_teaching_weights(h);
        let z = log_sum_exp(&log_w);
        let p: Vec<f64> = log_w.iter().map(|x| (x - z).exp()).collect();
        ProbabilityVector::from_weights(&p).expect("teaching weights are positive")
    }

    /// Posterior after datum `d`: row `d` of the scaled matrix.
    pub fn posterior(&self, d: usize) -> LogBelief {
        let row = (0..self.kernel.cols())
            .map(|j| self.kernel.scaled_log_entry(&self.scaling, d, j))
            .collect();
        LogBelief::from_log_weights(row)
    }
}
