use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BiKernel, ScbiKernel};
use crate::error::{check_index, Error, Result};
use crate::matrix::PositiveMatrix;
use crate::seed::{rng_from_seed, SimRng};
use crate::simplex::{LogBelief, ProbabilityVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bi,
    Scbi,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Bi => "bi",
            Mode::Scbi => "scbi",
        }
    }
}

/// One teaching episode. Teacher and learner may hold different matrices and
/// priors; with equal ones the learner's state is the teacher's prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub teacher_matrix: PositiveMatrix,
    pub learner_matrix: PositiveMatrix,
    pub teacher_prior: ProbabilityVector,
    pub learner_prior: ProbabilityVector,
    pub true_hypothesis: usize,
    pub rounds: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl EpisodeConfig {
    /// Matched agents sharing `matrix` and `prior`.
    pub fn matched(
        matrix: PositiveMatrix,
        prior: ProbabilityVector,
        true_hypothesis: usize,
        rounds: usize,
        mode: Mode,
        seed: u64,
    ) -> Self {
        Self {
            teacher_matrix: matrix.clone(),
            learner_matrix: matrix,
            teacher_prior: prior.clone(),
            learner_prior: prior,
            true_hypothesis,
            rounds,
            mode,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.teacher_matrix.shape();
        if self.learner_matrix.shape() != (n, m) {
            return Err(Error::InvalidConfig(format!(
                "teacher matrix is {n}x{m} but learner matrix is {}x{}",
                self.learner_matrix.rows(),
                self.learner_matrix.cols()
            )));
        }
        for prior in [&self.teacher_prior, &self.learner_prior] {
            if prior.dim() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: prior.dim(),
                });
            }
        }
        check_index(self.true_hypothesis, m)?;
        let h = self.true_hypothesis;
        if self.teacher_prior.get(h) <= 0.0 || self.learner_prior.get(h) <= 0.0 {
            return Err(Error::BoundaryPrior { index: h });
        }
        if self.mode == Mode::Scbi {
            self.teacher_prior.require_interior()?;
            self.learner_prior.require_interior()?;
        }
        Ok(())
    }

    fn is_shared(&self) -> bool {
        self.teacher_matrix == self.learner_matrix && self.teacher_prior == self.learner_prior
    }
}

/// Record of one episode. Posterior sequences start at round 0 (the priors),
/// so each has `data.len() + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub data: Vec<usize>,
    pub teacher_posteriors: Vec<ProbabilityVector>,
    pub learner_posteriors: Vec<ProbabilityVector>,
    /// Exact log-odds of the true hypothesis, per round.
    pub teacher_log_odds: Vec<f64>,
    pub learner_log_odds: Vec<f64>,
    pub seed: u64,
}

enum Engine {
    Bi(BiKernel),
    Scbi(ScbiKernel),
}

impl Engine {
    fn new(mode: Mode, m: &PositiveMatrix) -> Result<Self> {
        Ok(match mode {
            Mode::Bi => Engine::Bi(BiKernel::new(m)?),
            Mode::Scbi => Engine::Scbi(ScbiKernel::new(m)),
        })
    }

    fn update(&self, belief: &LogBelief, d: usize) -> Result<LogBelief> {
        match self {
            Engine::Bi(k) => Ok(k.update(belief, d)),
            Engine::Scbi(k) => Ok(k.round(belief)?.posterior(d)),
        }
    }
}

/// Step-by-step episode state, for drivers that need early stopping or no
/// stored trace.
pub struct EpisodeRunner {
    h: usize,
    rows: usize,
    teacher: Engine,
    /// `None` when the learner coincides with the teacher's simulation.
    learner: Option<Engine>,
    teacher_state: LogBelief,
    learner_state: LogBelief,
    rounds_done: usize,
}

impl EpisodeRunner {
    pub fn new(cfg: &EpisodeConfig) -> Result<Self> {
        cfg.validate()?;
        let shared = cfg.is_shared();
        let teacher_state = belief_from(&cfg.teacher_prior, cfg.mode)?;
        let learner_state = belief_from(&cfg.learner_prior, cfg.mode)?;
        Ok(Self {
            h: cfg.true_hypothesis,
            rows: cfg.teacher_matrix.rows(),
            teacher: Engine::new(cfg.mode, &cfg.teacher_matrix)?,
            learner: if shared {
                None
            } else {
                Some(Engine::new(cfg.mode, &cfg.learner_matrix)?)
            },
            teacher_state,
            learner_state,
            rounds_done: 0,
        })
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    pub fn teacher_belief(&self) -> &LogBelief {
        &self.teacher_state
    }

    pub fn learner_belief(&self) -> &LogBelief {
        &self.learner_state
    }

    /// Teacher samples a datum and both agents update. Returns the datum.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize> {
        let (d, next_teacher) = match &self.teacher {
            Engine::Bi(k) => {
                let d = sample_index(&k.teaching_distribution(self.h), rng);
                (d, k.update(&self.teacher_state, d))
            }
            Engine::Scbi(k) => {
                let round = k.round(&self.teacher_state)?;
                let d = sample_index(round.teaching_distribution(self.h).as_slice(), rng);
                (d, round.posterior(d))
            }
        };
        self.advance(d, next_teacher)?;
        Ok(d)
    }

    /// Both agents update on a datum chosen by the caller.
    pub fn step_forced(&mut self, d: usize) -> Result<()> {
        check_index(d, self.rows)?;
        let next_teacher = self.teacher.update(&self.teacher_state, d)?;
        self.advance(d, next_teacher)
    }

    fn advance(&mut self, d: usize, next_teacher: LogBelief) -> Result<()> {
        self.learner_state = match &self.learner {
            None => next_teacher.clone(),
            Some(engine) => engine.update(&self.learner_state, d)?,
        };
        self.teacher_state = next_teacher;
        self.rounds_done += 1;
        Ok(())
    }
}

fn belief_from(p: &ProbabilityVector, mode: Mode) -> Result<LogBelief> {
    match mode {
        Mode::Scbi => LogBelief::from_probability(p),
        // BI admits zeros off the true hypothesis; they stay zero.
        Mode::Bi => Ok(LogBelief::from_log_weights(
            p.as_slice().iter().map(|x| x.ln()).collect(),
        )),
    }
}

/// Inverse-CDF draw from non-negative weights.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

struct TraceRecorder {
    trace: EpisodeTrace,
    h: usize,
}

impl TraceRecorder {
    fn new(seed: u64, h: usize, runner: &EpisodeRunner) -> Self {
        let mut rec = Self {
            trace: EpisodeTrace {
                data: Vec::new(),
                teacher_posteriors: Vec::new(),
                learner_posteriors: Vec::new(),
                teacher_log_odds: Vec::new(),
                learner_log_odds: Vec::new(),
                seed,
            },
            h,
        };
        rec.record(runner);
        rec
    }

    fn record(&mut self, runner: &EpisodeRunner) {
        let t = &mut self.trace;
        t.teacher_posteriors.push(runner.teacher_belief().to_probability());
        t.learner_posteriors.push(runner.learner_belief().to_probability());
        t.teacher_log_odds.push(runner.teacher_belief().log_odds(self.h));
        t.learner_log_odds.push(runner.learner_belief().log_odds(self.h));
    }
}

/// Run `cfg.rounds` sampled rounds with the episode's own seed.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<EpisodeTrace> {
    let mut rng = rng_from_seed(cfg.seed);
    run_episode_with_rng(cfg, &mut rng)
}

pub fn run_episode_with_rng(cfg: &EpisodeConfig, rng: &mut SimRng) -> Result<EpisodeTrace> {
    let mut runner = EpisodeRunner::new(cfg)?;
    let mut rec = TraceRecorder::new(cfg.seed, cfg.true_hypothesis, &runner);
    for _ in 0..cfg.rounds {
        let d = runner.step(rng)?;
        rec.trace.data.push(d);
        rec.record(&runner);
    }
    Ok(rec.trace)
}

/// Replay a given data sequence instead of sampling.
pub fn run_episode_forced(cfg: &EpisodeConfig, data: &[usize]) -> Result<EpisodeTrace> {
    let mut runner = EpisodeRunner::new(cfg)?;
    let mut rec = TraceRecorder::new(cfg.seed, cfg.true_hypothesis, &runner);
    for &d in data {
        runner.step_forced(d)?;
        rec.trace.data.push(d);
        rec.record(&runner);
    }
    Ok(rec.trace)
}
