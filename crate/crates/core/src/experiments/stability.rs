//! Robustness of cooperative teaching to a learner whose prior or likelihood
//! matrix differs from the teacher's.
//!
//! Perturbations live in the plane of the relevant simplex, spanned by the
//! orthonormal sum-zero basis `vₖ = (1, …, 1, −k, 0, …) / √(k(k+1))`. For three
//! coordinates this is `(1, −1, 0)/√2` and `(1, 1, −2)/√6`; angle 0 points
//! along the first. All distances are Euclidean.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::estimators::{normalized_kl, roc_scbi, EpisodeConfig, Mode};
use crate::matrix::{normalize_columns, PositiveMatrix};
use crate::measure::{successful_rate, SuccessRateConfig, SuccessRateEstimate};
use crate::row;
use crate::seed::{rng_from_seed, task_seed};
use crate::simplex::{l2_distance, sample_simplex_uniform, ProbabilityVector};

use super::table::{Cell, Table};

/// Task id reserved for geometry draws (random directions, uniform points).
const GEOMETRY_TASK: u64 = u64::MAX;

/// `k`-th vector (from 1) of the orthonormal sum-zero basis of `ℝᵈ`.
pub fn sum_zero_basis(dim: usize, k: usize) -> Vec<f64> {
    assert!(k >= 1 && k < dim, "basis index out of range");
    let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
    (0..dim)
        .map(|i| match i.cmp(&k) {
            std::cmp::Ordering::Less => scale,
            std::cmp::Ordering::Equal => -(k as f64) * scale,
            std::cmp::Ordering::Greater => 0.0,
        })
        .collect()
}

/// Unit vector at `angle` in the plane of the first two basis vectors.
pub fn plane_direction(dim: usize, angle: f64) -> Vec<f64> {
    let (e1, e2) = (sum_zero_basis(dim, 1), sum_zero_basis(dim, 2));
    e1.iter().zip(&e2).map(|(a, b)| angle.cos() * a + angle.sin() * b).collect()
}

/// Uniformly random unit direction within the sum-zero hyperplane.
pub fn random_direction<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let mean = v.iter().sum::<f64>() / dim as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn offset(center: &[f64], direction: &[f64], radius: f64) -> Vec<f64> {
    center.iter().zip(direction).map(|(c, d)| c + radius * d).collect()
}

/// Least-squares line with its coefficient of determination. A response with
/// no variance is fitted exactly by a constant, so `r_squared` is then 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidConfig("a line needs at least two paired points".into()));
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScheme {
    /// `directions` rays at given radii. Three hypotheses: evenly spaced
    /// angles in the simplex plane. More: random directions.
    Rays { directions: usize, radii: Vec<f64> },
    /// `layers` concentric circles, radius `spacing·i` with `6i` points on
    /// layer `i`. Points at multiples of 60° also form six rays.
    Circles { layers: usize, spacing: f64 },
    /// Uniform draws from the whole simplex.
    Uniform { points: usize },
}

impl PriorScheme {
    /// Six rays to radius 0.07 for three hypotheses; fifteen random rays to
    /// radius 0.1 otherwise.
    pub fn default_rays(hypotheses: usize) -> Self {
        if hypotheses == 3 {
            PriorScheme::Rays { directions: 6, radii: (1..=14).map(|i| 0.005 * i as f64).collect() }
        } else {
            PriorScheme::Rays { directions: 15, radii: (1..=20).map(|i| 0.005 * i as f64).collect() }
        }
    }

    pub fn default_circles() -> Self {
        PriorScheme::Circles { layers: 14, spacing: 0.005 }
    }

    pub fn default_uniform() -> Self {
        PriorScheme::Uniform { points: 300 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorScheme::Rays { .. } => "rays",
            PriorScheme::Circles { .. } => "circles",
            PriorScheme::Uniform { .. } => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSweepConfig {
    pub label: String,
    pub matrix: PositiveMatrix,
    pub teacher_prior: ProbabilityVector,
    pub hypothesis: usize,
    pub scheme: PriorScheme,
    pub rate: SuccessRateConfig,
    /// Every point reuses the same episode seeds, so differences between
    /// points are not masked by sampling noise.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSweepPoint {
    /// Ray index, circle layer, or sample index; `None` for the unperturbed point.
    pub group: Option<usize>,
    /// Ray index when the point lies on a ray.
    pub ray: Option<usize>,
    pub learner_prior: ProbabilityVector,
    pub distance: f64,
    pub estimate: SuccessRateEstimate,
    /// `1 − distance / θ₀ᵀ(h)`.
    pub bound: f64,
}

impl PriorSweepPoint {
    pub fn violates_bound(&self) -> bool {
        self.estimate.value < self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSweepResult {
    pub config: PriorSweepConfig,
    pub baseline: PriorSweepPoint,
    pub points: Vec<PriorSweepPoint>,
    /// Points that fell outside the open simplex.
    pub skipped: usize,
    /// Rate against distance per ray with at least two admitted points,
    /// as `(ray, fit)`.
    pub ray_fits: Vec<(usize, LinearFit)>,
}

impl PriorSweepResult {
    pub fn bound_violations(&self) -> usize {
        self.points.iter().filter(|p| p.violates_bound()).count()
    }
}

struct Candidate {
    group: Option<usize>,
    ray: Option<usize>,
    point: Vec<f64>,
}

fn prior_candidates(cfg: &PriorSweepConfig) -> Result<Vec<Candidate>> {
    let m = cfg.teacher_prior.dim();
    let center = cfg.teacher_prior.as_slice();
    let mut rng = rng_from_seed(task_seed(cfg.seed, GEOMETRY_TASK));
    let mut out = Vec::new();
    match &cfg.scheme {
        PriorScheme::Rays { directions, radii } => {
            let dirs: Vec<Vec<f64>> = if m == 3 {
                (0..*directions)
                    .map(|r| plane_direction(3, std::f64::consts::TAU * r as f64 / *directions as f64))
                    .collect()
            } else {
                (0..*directions).map(|_| random_direction(m, &mut rng)).collect()
            };
            for (r, dir) in dirs.iter().enumerate() {
                for &radius in radii {
                    out.push(Candidate { group: Some(r), ray: Some(r), point: offset(center, dir, radius) });
                }
            }
        }
        PriorScheme::Circles { layers, spacing } => {
            if m < 3 {
                return Err(Error::InvalidConfig("circles need at least three hypotheses".into()));
            }
            for layer in 1..=*layers {
                let count = 6 * layer;
                for j in 0..count {
                    let angle = std::f64::consts::TAU * j as f64 / count as f64;
                    let ray = (j % layer == 0).then_some(j / layer);
                    let point = offset(center, &plane_direction(m, angle), spacing * layer as f64);
                    out.push(Candidate { group: Some(layer), ray, point });
                }
            }
        }
        PriorScheme::Uniform { points } => {
            for i in 0..*points {
                out.push(Candidate {
                    group: Some(i),
                    ray: None,
                    point: sample_simplex_uniform(m, &mut rng)?.into_vec(),
                });
            }
        }
    }
    Ok(out)
}

/// Successful rate for learner priors perturbed around the teacher's.
/// Teacher and learner share the matrix.
pub fn prior_perturbation_sweep(cfg: &PriorSweepConfig) -> Result<PriorSweepResult> {
    check_index(cfg.hypothesis, cfg.matrix.cols())?;
    let base = EpisodeConfig::matched(
        cfg.matrix.clone(),
        cfg.teacher_prior.clone(),
        cfg.hypothesis,
        0,
        Mode::Scbi,
        cfg.seed,
    );
    let theta_h = cfg.teacher_prior.get(cfg.hypothesis);
    let evaluate = |group, ray, prior: ProbabilityVector| -> Result<PriorSweepPoint> {
        let distance = l2_distance(prior.as_slice(), cfg.teacher_prior.as_slice());
        let episode = EpisodeConfig { learner_prior: prior.clone(), ..base.clone() };
        Ok(PriorSweepPoint {
            group,
            ray,
            estimate: successful_rate(&episode, &cfg.rate)?,
            learner_prior: prior,
            distance,
            bound: 1.0 - distance / theta_h,
        })
    };

    let baseline = evaluate(None, None, cfg.teacher_prior.clone())?;
    let candidates = prior_candidates(cfg)?;
    let mut skipped = 0;
    let mut admitted = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.point.iter().all(|&x| x > 0.0) {
            admitted.push((c.group, c.ray, ProbabilityVector::from_weights(&c.point)?));
        } else {
            log::info!("skipping learner prior {:?} outside the simplex", c.point);
            skipped += 1;
        }
    }
    let points = admitted
        .into_par_iter()
        .map(|(g, r, p)| evaluate(g, r, p))
        .collect::<Result<Vec<_>>>()?;
    let ray_fits = fit_rays(&points, |p| p.ray, |p| p.distance, |p| p.estimate.value)?;
    Ok(PriorSweepResult { config: cfg.clone(), baseline, points, skipped, ray_fits })
}

fn fit_rays<P>(
    points: &[P],
    ray: impl Fn(&P) -> Option<usize>,
    x: impl Fn(&P) -> f64,
    y: impl Fn(&P) -> f64,
) -> Result<Vec<(usize, LinearFit)>> {
    let rays = points.iter().filter_map(&ray).max().map_or(0, |r| r + 1);
    let mut fits = Vec::with_capacity(rays);
    for r in 0..rays {
        let on_ray: Vec<&P> = points.iter().filter(|p| ray(p) == Some(r)).collect();
        if on_ray.len() < 2 {
            continue;
        }
        let xs: Vec<f64> = on_ray.iter().map(|p| x(p)).collect();
        let ys: Vec<f64> = on_ray.iter().map(|p| y(p)).collect();
        fits.push((r, linear_fit(&xs, &ys)?));
    }
    Ok(fits)
}

fn opt(x: Option<usize>) -> Cell {
    x.map_or(Cell::Text(String::new()), Cell::from)
}

impl PriorSweepResult {
    pub fn to_table(&self) -> Table {
        let m = self.config.teacher_prior.dim();
        let mut header: Vec<String> = ["fixture", "scheme", "seed", "episodes", "group", "ray", "distance"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=m).map(|i| format!("learner_prior_{i}")));
        header.extend(
            ["rate", "std_error", "bound", "bound_violated", "capped_fraction"]
                .iter()
                .map(|s| s.to_string()),
        );
        let mut t = Table::new(&header);
        for p in std::iter::once(&self.baseline).chain(&self.points) {
            let mut r = row![
                self.config.label.as_str(),
                self.config.scheme.name(),
                self.config.seed,
                self.config.rate.episodes,
            ];
            r.push(opt(p.group));
            r.push(opt(p.ray));
            r.push(p.distance.into());
            r.extend(p.learner_prior.as_slice().iter().map(|&x| Cell::from(x)));
            r.extend(row![p.estimate.value, p.estimate.std_error, p.bound, p.violates_bound(), p.estimate.capped_fraction]);
            t.push(r);
        }
        t
    }

    pub fn fits_table(&self) -> Table {
        let mut t = Table::new(&["fixture", "ray", "slope", "intercept", "r_squared"]);
        for (r, f) in &self.ray_fits {
            t.push(row![self.config.label.as_str(), *r, f.slope, f.intercept, f.r_squared]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    /// The column attaining the SCBI rate.
    Relevant,
    /// The first column that is neither the target nor the relevant one.
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixScheme {
    /// `layers` circles of radius `spacing·i` with `6i` points each, plus the centre.
    Disc { layers: usize, spacing: f64 },
    /// Points on `rays` rays from the target column with the same
    /// normalized KL to the target as the unperturbed column.
    EquiKl { rays: usize },
    /// `(1 − w)·column + w·target` for `w = j/(points − 1)`.
    Interpolation { points: usize },
}

impl MatrixScheme {
    pub fn default_disc() -> Self {
        MatrixScheme::Disc { layers: 10, spacing: 0.005 }
    }

    pub fn default_equi_kl() -> Self {
        MatrixScheme::EquiKl { rays: 90 }
    }

    pub fn default_interpolation() -> Self {
        MatrixScheme::Interpolation { points: 50 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MatrixScheme::Disc { .. } => "disc",
            MatrixScheme::EquiKl { .. } => "equi_kl",
            MatrixScheme::Interpolation { .. } => "interpolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSweepConfig {
    pub label: String,
    pub teacher: PositiveMatrix,
    pub prior: ProbabilityVector,
    pub hypothesis: usize,
    pub role: ColumnRole,
    pub scheme: MatrixScheme,
    pub rate: SuccessRateConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSweepPoint {
    /// Circle layer, ray index, or interpolation index.
    pub group: usize,
    /// Angle in the column plane where defined.
    pub angle: Option<f64>,
    /// Euclidean distance from the unperturbed column.
    pub distance: f64,
    pub column: Vec<f64>,
    pub normalized_kl: f64,
    pub estimate: SuccessRateEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSweepResult {
    pub config: MatrixSweepConfig,
    /// Index of the perturbed column.
    pub column: usize,
    pub points: Vec<MatrixSweepPoint>,
    pub skipped: usize,
    /// Rate-versus-distance slopes along the disc's six ray-aligned
    /// directions, `(angle, slope)`; empty for other schemes.
    pub directional_gradients: Vec<(f64, f64)>,
}

impl MatrixSweepResult {
    /// Smallest and largest directional gradient magnitudes.
    pub fn gradient_range(&self) -> Option<(f64, f64)> {
        let mags = self.directional_gradients.iter().map(|(_, s)| s.abs());
        let min = mags.clone().fold(f64::INFINITY, f64::min);
        let max = mags.fold(0.0, f64::max);
        (!self.directional_gradients.is_empty()).then_some((min, max))
    }
}

/// Column of `T` perturbed for the given role.
pub fn perturbed_column_index(t: &PositiveMatrix, h: usize, role: ColumnRole) -> Result<usize> {
    let (_, relevant, _) = roc_scbi(t, h)?;
    match role {
        ColumnRole::Relevant => Ok(relevant),
        ColumnRole::Irrelevant => (0..t.cols())
            .find(|&j| j != h && j != relevant)
            .ok_or_else(|| Error::InvalidConfig("an irrelevant column needs at least three hypotheses".into())),
    }
}

/// Largest `t` with `base + t·dir` strictly positive.
fn boundary_step(base: &[f64], dir: &[f64]) -> f64 {
    base.iter()
        .zip(dir)
        .filter(|(_, d)| **d < 0.0)
        .map(|(b, d)| -b / d)
        .fold(f64::INFINITY, f64::min)
}

/// Bisection for `g(t) = 0` on `[lo, hi]` with `g(lo) < 0 < g(hi)`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, g: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

struct ColumnCandidate {
    group: usize,
    angle: Option<f64>,
    column: Vec<f64>,
}

fn matrix_candidates(cfg: &MatrixSweepConfig, t: &PositiveMatrix, j: usize) -> Result<(Vec<ColumnCandidate>, usize)> {
    let n = t.rows();
    let original = t.column(j);
    let target = t.column(cfg.hypothesis);
    let mut out = Vec::new();
    let mut failed = 0;
    match &cfg.scheme {
        MatrixScheme::Disc { layers, spacing } => {
            if n < 3 {
                return Err(Error::InvalidConfig("a disc needs at least three data".into()));
            }
            out.push(ColumnCandidate { group: 0, angle: None, column: original.clone() });
            for layer in 1..=*layers {
                let count = 6 * layer;
                for k in 0..count {
                    let angle = std::f64::consts::TAU * k as f64 / count as f64;
                    let column = offset(&original, &plane_direction(n, angle), spacing * layer as f64);
                    out.push(ColumnCandidate { group: layer, angle: Some(angle), column });
                }
            }
        }
        MatrixScheme::EquiKl { rays } => {
            if n < 3 {
                return Err(Error::InvalidConfig("equi-KL rays need at least three data".into()));
            }
            let level = normalized_kl(&target, &original)?;
            for r in 0..*rays {
                let angle = std::f64::consts::TAU * r as f64 / *rays as f64;
                let dir = plane_direction(n, angle);
                let hi = boundary_step(&target, &dir) * (1.0 - 1e-9);
                let g = |s: f64| -> Result<f64> { Ok(normalized_kl(&target, &offset(&target, &dir, s))? - level) };
                if !(hi.is_finite() && g(hi)? > 0.0) {
                    log::info!("no equi-KL point on ray {r}");
                    failed += 1;
                    continue;
                }
                let s = bisect(0.0, hi, 1e-10, g)?;
                out.push(ColumnCandidate { group: r, angle: Some(angle), column: offset(&target, &dir, s) });
            }
        }
        MatrixScheme::Interpolation { points } => {
            if *points < 2 {
                return Err(Error::InvalidConfig("interpolation needs at least two points".into()));
            }
            for k in 0..*points {
                let w = k as f64 / (*points - 1) as f64;
                let column = original.iter().zip(&target).map(|(o, t)| (1.0 - w) * o + w * t).collect();
                out.push(ColumnCandidate { group: k, angle: None, column });
            }
        }
    }
    Ok((out, failed))
}

/// Successful rate when the learner's matrix differs from the teacher's in one
/// column. Both agents share the prior.
pub fn matrix_perturbation_sweep(cfg: &MatrixSweepConfig) -> Result<MatrixSweepResult> {
    check_index(cfg.hypothesis, cfg.teacher.cols())?;
    let t = normalize_columns(&cfg.teacher, &vec![1.0; cfg.teacher.cols()])?;
    let j = perturbed_column_index(&t, cfg.hypothesis, cfg.role)?;
    let original = t.column(j);
    let target = t.column(cfg.hypothesis);
    let (candidates, mut skipped) = matrix_candidates(cfg, &t, j)?;

    let mut admitted = Vec::with_capacity(candidates.len());
    for c in candidates {
        if !c.column.iter().all(|&x| x > 0.0) {
            log::info!("skipping column {:?} outside the simplex", c.column);
            skipped += 1;
            continue;
        }
        match t.with_column(j, &c.column) {
            Ok(l) => admitted.push((c, l)),
            Err(e) => {
                log::info!("skipping column {:?}: {e}", c.column);
                skipped += 1;
            }
        }
    }
    let base = EpisodeConfig::matched(t.clone(), cfg.prior.clone(), cfg.hypothesis, 0, Mode::Scbi, cfg.seed);
    let points = admitted
        .into_par_iter()
        .map(|(c, l)| {
            let episode = EpisodeConfig { learner_matrix: l, ..base.clone() };
            Ok(MatrixSweepPoint {
                group: c.group,
                angle: c.angle,
                distance: l2_distance(&c.column, &original),
                normalized_kl: normalized_kl(&target, &c.column)?,
                estimate: successful_rate(&episode, &cfg.rate)?,
                column: c.column,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let directional_gradients = match cfg.scheme {
        MatrixScheme::Disc { .. } => disc_gradients(&points)?,
        _ => Vec::new(),
    };
    Ok(MatrixSweepResult { config: cfg.clone(), column: j, points, skipped, directional_gradients })
}

/// Slopes along the six directions at multiples of 60°, which every layer
/// samples; the centre is shared by all six.
fn disc_gradients(points: &[MatrixSweepPoint]) -> Result<Vec<(f64, f64)>> {
    let ray_of = |p: &MatrixSweepPoint| -> Option<usize> {
        if p.group == 0 {
            return None;
        }
        let k = (p.angle? / std::f64::consts::TAU * (6 * p.group) as f64).round() as usize;
        k.is_multiple_of(p.group).then_some(k / p.group)
    };
    let center = points.iter().find(|p| p.group == 0);
    let mut out = Vec::new();
    for r in 0..6 {
        let on_ray: Vec<&MatrixSweepPoint> = center.into_iter().chain(points.iter().filter(|p| ray_of(p) == Some(r))).collect();
        if on_ray.len() < 2 {
            continue;
        }
        let xs: Vec<f64> = on_ray.iter().map(|p| p.distance).collect();
        let ys: Vec<f64> = on_ray.iter().map(|p| p.estimate.value).collect();
        out.push((std::f64::consts::TAU * r as f64 / 6.0, linear_fit(&xs, &ys)?.slope));
    }
    Ok(out)
}

impl MatrixSweepResult {
    pub fn to_table(&self) -> Table {
        let n = self.config.teacher.rows();
        let mut header: Vec<String> = ["fixture", "scheme", "role", "column", "seed", "episodes", "group", "angle", "distance"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=n).map(|i| format!("entry_{i}")));
        header.extend(["normalized_kl", "rate", "std_error", "capped_fraction"].iter().map(|s| s.to_string()));
        let role = match self.config.role {
            ColumnRole::Relevant => "relevant",
            ColumnRole::Irrelevant => "irrelevant",
        };
        let mut t = Table::new(&header);
        for p in &self.points {
            let mut r = row![
                self.config.label.as_str(),
                self.config.scheme.name(),
                role,
                self.column + 1,
                self.config.seed,
                self.config.rate.episodes,
                p.group,
            ];
            r.push(p.angle.map_or(Cell::Text(String::new()), Cell::from));
            r.push(p.distance.into());
            r.extend(p.column.iter().map(|&x| Cell::from(x)));
            r.extend(row![p.normalized_kl, p.estimate.value, p.estimate.std_error, p.estimate.capped_fraction]);
            t.push(r);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fixtures;
    use approx::assert_abs_diff_eq;

    fn rate(episodes: usize) -> SuccessRateConfig {
        SuccessRateConfig { episodes, ..Default::default() }
    }

    #[test]
    fn basis_is_orthonormal_and_sums_to_zero() {
        let e1 = sum_zero_basis(3, 1);
        let e2 = sum_zero_basis(3, 2);
        assert_abs_diff_eq!(e1[0], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(e2[2], -2.0 / 6f64.sqrt(), epsilon = 1e-15);
        for dim in 3..7 {
            for a in 1..dim {
                let va = sum_zero_basis(dim, a);
                assert_abs_diff_eq!(va.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
                for b in 1..dim {
                    let dot: f64 = va.iter().zip(sum_zero_basis(dim, b)).map(|(x, y)| x * y).sum();
                    assert_abs_diff_eq!(dot, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-14);
                }
            }
        }
        let mut rng = rng_from_seed(1);
        let d = random_direction(4, &mut rng);
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn linear_fit_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let f = linear_fit(&x, &[1.0, 0.5, 0.0, -0.5]).unwrap();
        assert_abs_diff_eq!(f.slope, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.intercept, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-15);
        assert_eq!(linear_fit(&x, &[1.0; 4]).unwrap().r_squared, 1.0);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn circle_layout() {
        let cfg = PriorSweepConfig {
            label: "m3".into(),
            matrix: fixtures::matrix("m3").unwrap(),
            teacher_prior: fixtures::prior("theta1").unwrap(),
            hypothesis: 0,
            scheme: PriorScheme::default_circles(),
            rate: rate(1),
            seed: 0,
        };
        let c = prior_candidates(&cfg).unwrap();
        assert_eq!(c.len(), 630);
        assert_eq!(c.iter().filter(|p| p.ray.is_some()).count(), 84);
        let on_ray_2: Vec<&Candidate> = c.iter().filter(|p| p.ray == Some(2)).collect();
        assert_eq!(on_ray_2.len(), 14);
        let center = cfg.teacher_prior.as_slice();
        let dir = plane_direction(3, std::f64::consts::TAU / 3.0);
        for (i, p) in on_ray_2.iter().enumerate() {
            let expected = offset(center, &dir, 0.005 * (i + 1) as f64);
            assert!(l2_distance(&p.point, &expected) < 1e-12);
        }
    }

    #[test]
    fn unperturbed_prior_always_succeeds_and_far_points_are_skipped() {
        let cfg = PriorSweepConfig {
            label: "m3".into(),
            matrix: fixtures::matrix("m3").unwrap(),
            teacher_prior: fixtures::prior("theta1").unwrap(),
            hypothesis: 0,
            scheme: PriorScheme::Rays { directions: 6, radii: vec![0.02, 0.5] },
            rate: rate(40),
            seed: 5,
        };
        let r = prior_perturbation_sweep(&cfg).unwrap();
        assert_eq!(r.baseline.estimate.value, 1.0);
        assert_eq!(r.baseline.distance, 0.0);
        assert_eq!(r.skipped, 6);
        assert_eq!(r.points.len(), 6);
        assert_eq!(r.to_table().len(), 7);
        assert!(r.ray_fits.is_empty());
    }

    #[test]
    fn column_roles() {
        let t = fixtures::matrix("m3").unwrap();
        let rel = perturbed_column_index(&t, 0, ColumnRole::Relevant).unwrap();
        let irr = perturbed_column_index(&t, 0, ColumnRole::Irrelevant).unwrap();
        assert_eq!(rel, roc_scbi(&t, 0).unwrap().1);
        let mut all = vec![0, rel, irr];
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn equi_kl_points_keep_the_divergence() {
        let cfg = MatrixSweepConfig {
            label: "m3".into(),
            teacher: fixtures::matrix("m3").unwrap(),
            prior: fixtures::prior("theta1").unwrap(),
            hypothesis: 0,
            role: ColumnRole::Relevant,
            scheme: MatrixScheme::EquiKl { rays: 12 },
            rate: rate(1),
            seed: 0,
        };
        let t = cfg.teacher.clone();
        let j = perturbed_column_index(&t, 0, ColumnRole::Relevant).unwrap();
        let level = normalized_kl(&t.column(0), &t.column(j)).unwrap();
        let (cands, failed) = matrix_candidates(&cfg, &t, j).unwrap();
        assert_eq!(cands.len() + failed, 12);
        for c in &cands {
            assert_abs_diff_eq!(normalized_kl(&t.column(0), &c.column).unwrap(), level, epsilon = 1e-8);
            assert_abs_diff_eq!(c.column.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_rejects_the_target_itself() {
        let cfg = MatrixSweepConfig {
            label: "m3".into(),
            teacher: fixtures::matrix("m3").unwrap(),
            prior: fixtures::prior("theta1").unwrap(),
            hypothesis: 0,
            role: ColumnRole::Irrelevant,
            scheme: MatrixScheme::Interpolation { points: 5 },
            rate: rate(20),
            seed: 2,
        };
        let r = matrix_perturbation_sweep(&cfg).unwrap();
        assert_eq!(r.points.len(), 4);
        assert_eq!(r.skipped, 1);
        // w = 0 is the unperturbed matrix
        assert_eq!(r.points[0].distance, 0.0);
        assert_eq!(r.points[0].estimate.value, 1.0);
    }

    #[test]
    fn disc_has_330_perturbations_and_six_gradients() {
        let cfg = MatrixSweepConfig {
            label: "m3".into(),
            teacher: fixtures::matrix("m3").unwrap(),
            prior: fixtures::prior("theta1").unwrap(),
            hypothesis: 0,
            role: ColumnRole::Relevant,
            scheme: MatrixScheme::default_disc(),
            rate: rate(4),
            seed: 3,
        };
        let t = cfg.teacher.clone();
        let (cands, _) = matrix_candidates(&cfg, &t, 1).unwrap();
        assert_eq!(cands.len(), 331);
        let r = matrix_perturbation_sweep(&cfg).unwrap();
        assert_eq!(r.directional_gradients.len(), 6);
        let (lo, hi) = r.gradient_range().unwrap();
        assert!(lo <= hi);
    }
}
