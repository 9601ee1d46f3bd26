//! Finitely supported probability measures on the simplex, the one-round
//! transition operators acting on them, and the Monte Carlo successful rate.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::estimators::{EpisodeConfig, EpisodeRunner, Mode, ScbiKernel};
use crate::matrix::PositiveMatrix;
use crate::seed::{episode_seed, rng_from_seed};
use crate::simplex::{LogBelief, ProbabilityVector};

/// Mass tolerance for a measure's total weight.
pub const MASS_TOLERANCE: f64 = 1e-9;
/// Default ceiling on the atom count of an exact tree.
pub const DEFAULT_ATOM_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub point: ProbabilityVector,
}

/// A probability measure with finitely many atoms. Atom order is meaningful:
/// operators fan out atom by atom, so the children of atom `a` in an exact
/// tree over `n` data occupy indices `a·n .. a·n + n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn dirac(point: ProbabilityVector) -> Self {
        Self {
            atoms: vec![Atom { weight: 1.0, point }],
        }
    }

    /// Zero-weight atoms are dropped; weights must be non-negative and sum to
    /// one, and all points must share a dimension.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.weight != 0.0).collect();
        let Some(first) = atoms.first() else {
            return Err(Error::DegenerateVector);
        };
        let dim = first.point.dim();
        let mut total = 0.0;
        for a in &atoms {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::InvalidProbability(format!("atom weight {}", a.weight)));
            }
            if a.point.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.point.dim(),
                });
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidProbability(format!("atom weights sum to {total}")));
        }
        Ok(Self { atoms })
    }

    /// `Σ aᵢ μᵢ` for mixing weights `aᵢ` summing to one.
    pub fn mix(parts: &[(f64, &AtomicMeasure)]) -> Result<Self> {
        let atoms = parts
            .iter()
            .flat_map(|(a, mu)| {
                mu.atoms.iter().map(move |atom| Atom {
                    weight: a * atom.weight,
                    point: atom.point.clone(),
                })
            })
            .collect();
        Self::from_atoms(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].point.dim()
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Atoms sorted by point (lexicographically), then weight.
    pub fn canonical(&self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(compare_atoms);
        Self { atoms }
    }

    /// Canonical form with atoms whose points agree within `tolerance` (L∞)
    /// merged into one. Neighbours in canonical order are compared, so this is
    /// exact for duplicates and a heuristic beyond that.
    pub fn merged(&self, tolerance: f64) -> Self {
        let sorted = self.canonical().atoms;
        let mut out: Vec<Atom> = Vec::with_capacity(sorted.len());
        for atom in sorted {
            match out.last_mut() {
                Some(last) if linf(&last.point, &atom.point) <= tolerance => last.weight += atom.weight,
                _ => out.push(atom),
            }
        }
        Self { atoms: out }
    }

    /// Largest difference between two measures compared atom by atom in
    /// canonical order, over weights and coordinates. Infinite when the atom
    /// counts differ.
    pub fn canonical_distance(&self, other: &Self) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        let (a, b) = (self.canonical(), other.canonical());
        a.atoms
            .iter()
            .zip(&b.atoms)
            .map(|(x, y)| (x.weight - y.weight).abs().max(linf(&x.point, &y.point)))
            .fold(0.0, f64::max)
    }
}

fn linf(p: &ProbabilityVector, q: &ProbabilityVector) -> f64 {
    p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn compare_atoms(a: &Atom, b: &Atom) -> Ordering {
    for (x, y) in a.point.as_slice().iter().zip(b.point.as_slice()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.weight.total_cmp(&b.weight)
}

/// One teaching round toward `h` applied to a measure of learner states: each
/// atom `(w, θ)` becomes `n` atoms `(w·τ(θ)ᵢ, M^⟨nθ⟩[i, ·])`.
pub fn psi_step(m: &PositiveMatrix, h: usize, mu: &AtomicMeasure) -> Result<AtomicMeasure> {
    check_index(h, m.cols())?;
    check_measure_dim(m, mu)?;
    let kernel = ScbiKernel::new(m);
    let children = mu
        .atoms
        .par_iter()
        .map(|atom| {
            let round = kernel.round(&LogBelief::from_probability(&atom.point)?)?;
            let tau = round.teaching_distribution(h);
            Ok((0..m.rows())
                .map(|i| Atom {
                    weight: atom.weight * tau.get(i),
                    point: round.posterior(i).to_probability(),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AtomicMeasure {
        atoms: children.into_iter().flatten().filter(|a| a.weight > 0.0).collect(),
    })
}

/// One round with data drawn uniformly: each atom fans out with weight `w/n`
/// onto every cooperative posterior. Vertices are fixed.
pub fn psi_uniform_step(l: &PositiveMatrix, mu: &AtomicMeasure) -> Result<AtomicMeasure> {
    check_measure_dim(l, mu)?;
    let n = l.rows();
    let kernel = ScbiKernel::new(l);
    let children = mu
        .atoms
        .par_iter()
        .map(|atom| {
            if atom.point.as_slice().contains(&1.0) {
                return Ok(vec![atom.clone()]);
            }
            let round = kernel.round(&LogBelief::from_probability(&atom.point)?)?;
            Ok((0..n)
                .map(|d| Atom {
                    weight: atom.weight / n as f64,
                    point: round.posterior(d).to_probability(),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AtomicMeasure {
        atoms: children.into_iter().flatten().collect(),
    })
}

fn check_measure_dim(m: &PositiveMatrix, mu: &AtomicMeasure) -> Result<()> {
    if mu.dim() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            found: mu.dim(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    pub atom_cap: u128,
    /// Merge atoms closer than this (L∞) after every round.
    pub merge_tolerance: Option<f64>,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            atom_cap: DEFAULT_ATOM_CAP,
            merge_tolerance: None,
        }
    }
}

/// Law of the learner's posterior after `k` rounds: `Ψ(h)ᵏ δ_θ₀`, with `nᵏ`
/// atoms in data-path order.
pub fn exact_distribution(
    m: &PositiveMatrix,
    h: usize,
    theta0: &ProbabilityVector,
    k: usize,
) -> Result<AtomicMeasure> {
    exact_distribution_with(m, h, theta0, k, &TreeOptions::default())
}

pub fn exact_distribution_with(
    m: &PositiveMatrix,
    h: usize,
    theta0: &ProbabilityVector,
    k: usize,
    options: &TreeOptions,
) -> Result<AtomicMeasure> {
    check_tree_size(m.rows(), k, options.atom_cap)?;
    let mut mu = AtomicMeasure::dirac(theta0.clone());
    for _ in 0..k {
        mu = psi_step(m, h, &mu)?;
        if let Some(tol) = options.merge_tolerance {
            mu = mu.merged(tol);
        }
    }
    Ok(mu)
}

pub(crate) fn check_tree_size(n: usize, k: usize, cap: u128) -> Result<()> {
    let atoms = u32::try_from(k)
        .ok()
        .and_then(|k| (n as u128).checked_pow(k))
        .unwrap_or(u128::MAX);
    if atoms > cap {
        Err(Error::TooManyAtoms { atoms, cap })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    /// `θ(h)`.
    Component(usize),
    /// `θ(numerator) / θ(denominator)`.
    Ratio { numerator: usize, denominator: usize },
    /// `ln(θ(h) / (1 − θ(h)))`.
    LogOdds(usize),
}

impl Functional {
    pub fn evaluate(&self, theta: &ProbabilityVector) -> Result<f64> {
        match *self {
            Functional::Component(h) => {
                check_index(h, theta.dim())?;
                Ok(theta.get(h))
            }
            Functional::Ratio { numerator, denominator } => {
                check_index(numerator, theta.dim())?;
                check_index(denominator, theta.dim())?;
                let den = theta.get(denominator);
                if den <= 0.0 {
                    return Err(Error::BoundaryPrior { index: denominator });
                }
                Ok(theta.get(numerator) / den)
            }
            Functional::LogOdds(h) => {
                check_index(h, theta.dim())?;
                let p = theta.get(h);
                if p <= 0.0 || p >= 1.0 {
                    return Err(Error::BoundaryPrior { index: h });
                }
                Ok((p / (1.0 - p)).ln())
            }
        }
    }
}

/// `Σ w · f(θ)` over the atoms.
pub fn expectation(mu: &AtomicMeasure, functional: Functional) -> Result<f64> {
    mu.atoms
        .iter()
        .map(|a| Ok(a.weight * functional.evaluate(&a.point)?))
        .sum()
}

/// Weighted standard deviation of `θ(h)`.
pub fn component_std(mu: &AtomicMeasure, h: usize) -> Result<f64> {
    let mean = expectation(mu, Functional::Component(h))?;
    let var: f64 = mu
        .atoms
        .iter()
        .map(|a| a.weight * (a.point.get(h) - mean).powi(2))
        .sum();
    Ok(var.max(0.0).sqrt())
}

/// `μ({θ : a ≤ θ(h) ≤ b})`.
pub fn mass_in_band(mu: &AtomicMeasure, h: usize, a: f64, b: f64) -> f64 {
    mu.atoms
        .iter()
        .filter(|atom| (a..=b).contains(&atom.point.get(h)))
        .map(|atom| atom.weight)
        .sum()
}

/// When the teacher considers teaching finished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once the teacher's log-odds on `h` reach this value.
    LogOdds(f64),
    /// Stop once the teacher's `θ(h)` reaches this probability.
    Probability(f64),
}

impl StopRule {
    pub fn log_odds_threshold(self) -> f64 {
        match self {
            StopRule::LogOdds(x) => x,
            StopRule::Probability(p) => (p / (1.0 - p)).ln(),
        }
    }
}

impl Default for StopRule {
    /// Log-odds 40: `θ(h)` equals one in double precision.
    fn default() -> Self {
        StopRule::LogOdds(40.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRateConfig {
    pub episodes: usize,
    pub stop: StopRule,
    pub k_max: usize,
}

impl Default for SuccessRateConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            stop: StopRule::default(),
            k_max: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRateEstimate {
    pub value: f64,
    pub std_error: f64,
    pub episodes: usize,
    /// Stop round → number of episodes. Episodes that never stopped are
    /// counted at `k_max`.
    pub stop_round_histogram: BTreeMap<usize, usize>,
    /// Fraction of episodes that reached `k_max` without stopping.
    pub capped_fraction: f64,
}

/// Mean learner posterior on the true hypothesis when the teacher stops.
/// Episode `e` uses seed `cfg.seed ⊕ e`; results do not depend on the thread
/// count.
pub fn successful_rate(cfg: &EpisodeConfig, rate: &SuccessRateConfig) -> Result<SuccessRateEstimate> {
    if cfg.mode != Mode::Scbi {
        return Err(Error::InvalidConfig("the successful rate is defined for SCBI episodes".into()));
    }
    if rate.episodes == 0 {
        return Err(Error::InvalidConfig("at least one episode is required".into()));
    }
    cfg.validate()?;
    let threshold = rate.stop.log_odds_threshold();
    let h = cfg.true_hypothesis;
    let outcomes = (0..rate.episodes as u64)
        .into_par_iter()
        .map(|e| {
            let mut rng = rng_from_seed(episode_seed(cfg.seed, e));
            let mut runner = EpisodeRunner::new(cfg)?;
            let mut stopped = false;
            while runner.rounds_done() < rate.k_max {
                if runner.teacher_belief().log_odds(h) >= threshold {
                    stopped = true;
                    break;
                }
                runner.step(&mut rng)?;
            }
            stopped |= runner.teacher_belief().log_odds(h) >= threshold;
            Ok((runner.learner_belief().prob(h), runner.rounds_done(), stopped))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let value = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
    let var = if outcomes.len() > 1 {
        outcomes.iter().map(|o| (o.0 - value).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut histogram = BTreeMap::new();
    let mut capped = 0usize;
    for &(_, round, stopped) in &outcomes {
        *histogram.entry(round).or_insert(0) += 1;
        capped += usize::from(!stopped);
    }
    let capped_fraction = capped as f64 / n;
    if capped_fraction > 0.01 {
        log::warn!(
            "{:.1}% of episodes reached k_max = {} before the teacher stopped",
            100.0 * capped_fraction,
            rate.k_max
        );
    }
    Ok(SuccessRateEstimate {
        value,
        std_error: (var / n).sqrt(),
        episodes: outcomes.len(),
        stop_round_histogram: histogram,
        capped_fraction,
    })
}
