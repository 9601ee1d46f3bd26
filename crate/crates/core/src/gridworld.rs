//! A small grid world with two candidate goals in the top corners. A teacher
//! walks toward the true goal; each action is a datum about which goal it is.
//!
//! Cells are `(x, y)` with `y = 0` the top row. The teachable band is every
//! cell with `1 ≤ x ≤ width − 2` and `y ≥ 1`, where left, up and right all
//! stay on the grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{bi_teacher_distribution, bi_update, sample_index, scbi_teacher_distribution, scbi_update, Mode};
use crate::matrix::{normalize_columns, PositiveMatrix};
use crate::row;
use crate::seed::{episode_seed, rng_from_seed, task_seed};
use crate::simplex::ProbabilityVector;
use crate::sinkhorn::scbi_scaled;

use crate::experiments::table::Table;

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Left,
    Up,
    Right,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Up, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Left => "left",
            Action::Up => "up",
            Action::Right => "right",
        }
    }
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Action::Left),
            "up" | "u" => Ok(Action::Up),
            "right" | "r" => Ok(Action::Right),
            other => Err(Error::Parse(format!("unknown action {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWorldConfig {
    pub width: usize,
    pub height: usize,
    pub goal_a: Cell,
    pub goal_b: Cell,
    pub start: Cell,
    pub gamma: f64,
    /// Cancels under normalization; kept for completeness of the value model.
    pub reward: f64,
    pub learner_gamma_offset: f64,
}

impl Default for GridWorldConfig {
    fn default() -> Self {
        Self {
            width: 5,
            height: 3,
            goal_a: (0, 0),
            goal_b: (4, 0),
            start: (2, 2),
            gamma: 0.9,
            reward: 1.0,
            learner_gamma_offset: 0.0,
        }
    }
}

impl GridWorldConfig {
    pub fn validate(&self) -> Result<()> {
        let in_open_unit = |g: f64| g > 0.0 && g < 1.0;
        if !in_open_unit(self.gamma) {
            return Err(Error::InvalidConfig(format!("discount {} is not in (0, 1)", self.gamma)));
        }
        if !in_open_unit(self.gamma + self.learner_gamma_offset) {
            return Err(Error::InvalidConfig(format!(
                "learner discount {} is not in (0, 1)",
                self.gamma + self.learner_gamma_offset
            )));
        }
        if self.reward <= 0.0 {
            return Err(Error::InvalidConfig("reward must be positive".into()));
        }
        for cell in [self.goal_a, self.goal_b, self.start] {
            if !self.on_grid(cell) {
                return Err(Error::InvalidConfig(format!("cell {cell:?} is off the grid")));
            }
        }
        Ok(())
    }

    fn on_grid(&self, (x, y): Cell) -> bool {
        x < self.width && y < self.height
    }

    pub fn in_band(&self, (x, y): Cell) -> bool {
        self.on_grid((x, y)) && x >= 1 && x + 2 <= self.width && y >= 1
    }

    pub fn step(&self, (x, y): Cell, action: Action) -> Result<Cell> {
        let next = match action {
            Action::Left => x.checked_sub(1).map(|x| (x, y)),
            Action::Up => y.checked_sub(1).map(|y| (x, y)),
            Action::Right => Some((x + 1, y)),
        };
        next.filter(|&c| self.on_grid(c))
            .ok_or_else(|| Error::InvalidConfig(format!("{} from {:?} leaves the grid", action.name(), (x, y))))
    }

    /// Same configuration seen through the learner's discount.
    pub fn learner_view(&self) -> Self {
        Self {
            gamma: self.gamma + self.learner_gamma_offset,
            learner_gamma_offset: 0.0,
            ..*self
        }
    }
}

fn manhattan(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Column-normalized likelihood of actions {left, up, right} (rows) under
/// goals {A, B} (columns) at `cell`: entry `γ^(distance to the goal after the
/// action)`.
pub fn build_cell_likelihood(cfg: &GridWorldConfig, cell: Cell) -> Result<PositiveMatrix> {
    cfg.validate()?;
    if !cfg.in_band(cell) {
        return Err(Error::InvalidConfig(format!("cell {cell:?} is outside the teachable band")));
    }
    let mut rows = Vec::with_capacity(3);
    for action in Action::ALL {
        let next = cfg.step(cell, action)?;
        rows.push(
            [cfg.goal_a, cfg.goal_b]
                .iter()
                .map(|&g| cfg.reward * cfg.gamma.powi(manhattan(next, g) as i32))
                .collect(),
        );
    }
    normalize_columns(&PositiveMatrix::from_rows(&rows)?, &[1.0, 1.0])
}

/// The cooperative teacher's likelihood at `cell` for learner state `theta`:
/// the scaled matrix, column-normalized.
pub fn teacher_matrix(cfg: &GridWorldConfig, cell: Cell, theta: &ProbabilityVector) -> Result<PositiveMatrix> {
    let scaled = scbi_scaled(&build_cell_likelihood(cfg, cell)?, theta)?;
    normalize_columns(&scaled, &[1.0, 1.0])
}

fn update(mode: Mode, m: &PositiveMatrix, theta: &ProbabilityVector, d: usize) -> Result<ProbabilityVector> {
    match mode {
        Mode::Bi => bi_update(m, theta, d),
        Mode::Scbi => scbi_update(m, theta, d),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRound {
    pub round: usize,
    pub action: Option<Action>,
    pub cell: Cell,
    pub bi_goal_a: f64,
    pub scbi_goal_a: f64,
}

/// Learner posteriors on goal A along a fixed trajectory from the start,
/// starting from the uniform prior. Row 0 is the prior.
pub fn run_gridworld_comparison(cfg: &GridWorldConfig, trajectory: &[Action]) -> Result<Vec<GridRound>> {
    cfg.validate()?;
    let mut cell = cfg.start;
    let (mut bi, mut scbi) = (ProbabilityVector::uniform(2), ProbabilityVector::uniform(2));
    let mut out = vec![GridRound { round: 0, action: None, cell, bi_goal_a: 0.5, scbi_goal_a: 0.5 }];
    for (k, &action) in trajectory.iter().enumerate() {
        let m = build_cell_likelihood(cfg, cell)?;
        bi = bi_update(&m, &bi, action.index())?;
        scbi = scbi_update(&m, &scbi, action.index())?;
        cell = cfg.step(cell, action)?;
        out.push(GridRound {
            round: k + 1,
            action: Some(action),
            cell,
            bi_goal_a: bi.get(0),
            scbi_goal_a: scbi.get(0),
        });
    }
    Ok(out)
}

pub fn comparison_table(rounds: &[GridRound]) -> Table {
    let mut t = Table::new(&["round", "action", "x", "y", "bi_goal_a", "scbi_goal_a"]);
    for r in rounds {
        t.push(row![
            r.round,
            r.action.map_or("", Action::name),
            r.cell.0,
            r.cell.1,
            r.bi_goal_a,
            r.scbi_goal_a,
        ]);
    }
    t
}

/// One mismatched episode: the teacher (discount `γ`) samples `rounds`
/// actions toward goal A; returns `|θᴸ(A) − θᵀ(A)|` after each round, where
/// the learner uses `γ + offset`.
fn mismatch_path(
    teacher: &GridWorldConfig,
    learner: &GridWorldConfig,
    mode: Mode,
    actions: &[Action],
) -> Result<Vec<f64>> {
    let mut cell = teacher.start;
    let (mut t, mut l) = (ProbabilityVector::uniform(2), ProbabilityVector::uniform(2));
    let mut out = Vec::with_capacity(actions.len());
    for &a in actions {
        t = update(mode, &build_cell_likelihood(teacher, cell)?, &t, a.index())?;
        l = update(mode, &build_cell_likelihood(learner, cell)?, &l, a.index())?;
        cell = teacher.step(cell, a)?;
        out.push((l.get(0) - t.get(0)).abs());
    }
    Ok(out)
}

fn teaching_distribution(mode: Mode, cfg: &GridWorldConfig, cell: Cell, theta: &ProbabilityVector) -> Result<ProbabilityVector> {
    let m = build_cell_likelihood(cfg, cell)?;
    match mode {
        Mode::Bi => bi_teacher_distribution(&m, 0),
        Mode::Scbi => scbi_teacher_distribution(&m, theta, 0),
    }
}

/// Exact expected gap per round, enumerating all `3^rounds` trajectories and
/// both offsets `±offset`.
pub fn mismatch_exact(cfg: &GridWorldConfig, mode: Mode, rounds: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut totals = vec![0.0; rounds];
    for sign in [1.0, -1.0] {
        let learner = GridWorldConfig { learner_gamma_offset: sign * cfg.learner_gamma_offset, ..*cfg }.learner_view();
        learner.validate()?;
        for path in 0..3usize.pow(rounds as u32) {
            let (mut code, mut weight, mut cell) = (path, 0.5, cfg.start);
            let mut theta = ProbabilityVector::uniform(2);
            let mut actions = Vec::with_capacity(rounds);
            for _ in 0..rounds {
                let a = Action::ALL[code % 3];
                code /= 3;
                weight *= teaching_distribution(mode, cfg, cell, &theta)?.get(a.index());
                theta = update(mode, &build_cell_likelihood(cfg, cell)?, &theta, a.index())?;
                cell = cfg.step(cell, a)?;
                actions.push(a);
            }
            for (k, gap) in mismatch_path(cfg, &learner, mode, &actions)?.into_iter().enumerate() {
                totals[k] += weight * gap;
            }
        }
    }
    Ok(totals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    pub mode: Mode,
    pub round: usize,
    pub mean_gap: f64,
    pub std_error: f64,
    pub exact: f64,
}

/// Monte Carlo estimate of the expected gap between the learner's posterior
/// on goal A and the teacher's estimate of it. Episode `e` (seed
/// `task_seed(seed, 0) ⊕ e`) draws the offset sign, then the teacher's
/// actions. Both modes see the same episode seeds.
pub fn gridworld_mismatch_experiment(
    cfg: &GridWorldConfig,
    rounds: usize,
    episodes: usize,
    seed: u64,
) -> Result<Vec<MismatchRow>> {
    cfg.validate()?;
    if episodes < 2 {
        return Err(Error::InvalidConfig("at least two episodes are required".into()));
    }
    let base = task_seed(seed, 0);
    let mut out = Vec::new();
    for mode in [Mode::Bi, Mode::Scbi] {
        let gaps = (0..episodes as u64)
            .into_par_iter()
            .map(|e| {
                let mut rng = rng_from_seed(episode_seed(base, e));
                let sign = if rand::Rng::random_bool(&mut rng, 0.5) { 1.0 } else { -1.0 };
                let learner = GridWorldConfig { learner_gamma_offset: sign * cfg.learner_gamma_offset, ..*cfg }.learner_view();
                let (mut cell, mut theta) = (cfg.start, ProbabilityVector::uniform(2));
                let mut actions = Vec::with_capacity(rounds);
                for _ in 0..rounds {
                    let tau = teaching_distribution(mode, cfg, cell, &theta)?;
                    let a = Action::ALL[sample_index(tau.as_slice(), &mut rng)];
                    theta = update(mode, &build_cell_likelihood(cfg, cell)?, &theta, a.index())?;
                    cell = cfg.step(cell, a)?;
                    actions.push(a);
                }
                mismatch_path(cfg, &learner, mode, &actions)
            })
            .collect::<Result<Vec<_>>>()?;
        let exact = mismatch_exact(cfg, mode, rounds)?;
        let n = episodes as f64;
        for k in 0..rounds {
            let mean = gaps.iter().map(|g| g[k]).sum::<f64>() / n;
            let var = gaps.iter().map(|g| (g[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            out.push(MismatchRow { mode, round: k + 1, mean_gap: mean, std_error: (var / n).sqrt(), exact: exact[k] });
        }
    }
    Ok(out)
}

pub fn mismatch_table(cfg: &GridWorldConfig, rows: &[MismatchRow]) -> Table {
    let mut t = Table::new(&["mode", "round", "gamma", "offset", "mean_gap", "std_error", "exact_gap"]);
    for r in rows {
        t.push(row![r.mode.as_str(), r.round, cfg.gamma, cfg.learner_gamma_offset, r.mean_gap, r.std_error, r.exact]);
    }
    t
}

/// `[[2/(3+3γ²), 2γ²/(3+3γ²)], [1/3, 1/3], [2γ²/(3+3γ²), 2/(3+3γ²)]]`, the
/// cooperative teacher's likelihood at the start under the uniform prior.
pub fn start_teacher_closed_form(gamma: f64) -> [[f64; 2]; 3] {
    let g2 = gamma * gamma;
    let d = 3.0 + 3.0 * g2;
    [[2.0 / d, 2.0 * g2 / d], [1.0 / 3.0, 1.0 / 3.0], [2.0 * g2 / d, 2.0 / d]]
}
