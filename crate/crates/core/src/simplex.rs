//! Points of the probability simplex and the scalar functionals defined on them.
//!
//! [`ProbabilityVector`] is the linear-domain representation used at API
//! boundaries. [`LogBelief`] carries the same point as log-probabilities and is
//! what long-running episodes evolve: posteriors on the true hypothesis approach
//! one far faster than `f64` can resolve, while their log-odds stay finite.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// Admission tolerance on the total mass of a [`ProbabilityVector`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A point of the simplex: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Admit `entries` as-is. Fails on negative or non-finite entries and on
    /// total mass further than [`SIMPLEX_TOLERANCE`] from one.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        if let Some(i) = entries.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidProbability(format!(
                "entry {i} = {} is negative or not finite",
                entries[i]
            )));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidProbability(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self(entries))
    }

    /// Normalize non-negative weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        normalize_vector(weights, 1.0).map(Self)
    }

    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0, "uniform distribution needs a positive dimension");
        Self(vec![1.0 / dim as f64; dim])
    }

    /// The vertex `δ_index`.
    pub fn vertex(dim: usize, index: usize) -> Result<Self> {
        check_index(index, dim)?;
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    /// All entries strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&x| x > 0.0)
    }

    /// First non-positive component, if any.
    pub(crate) fn require_interior(&self) -> Result<()> {
        match self.0.iter().position(|&x| x <= 0.0) {
            Some(index) => Err(Error::BoundaryPrior { index }),
            None => Ok(()),
        }
    }

    /// Copy with the drift of the stored total removed.
    pub fn renormalized(&self) -> Self {
        let total: f64 = self.0.iter().sum();
        Self(self.0.iter().map(|x| x / total).collect())
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Rescale a non-negative vector so that it sums to `total`.
pub fn normalize_vector(v: &[f64], total: f64) -> Result<Vec<f64>> {
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "normalization target must be positive, got {total}"
        )));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::DegenerateVector);
    }
    let sum: f64 = v.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::DegenerateVector);
    }
    let scale = total / sum;
    Ok(v.iter().map(|x| x * scale).collect())
}

/// `KL(p‖q) = Σ p ln(p/q)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    kl_divergence_slices(p.as_slice(), q.as_slice())
}

pub(crate) fn kl_divergence_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut acc = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(Error::SupportMismatch { index });
        }
        acc += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative value for p == q.
    Ok(acc.max(0.0))
}

pub fn l1_distance(p: &ProbabilityVector, q: &ProbabilityVector) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(p.as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// Euclidean distance between two simplex points.
pub fn l2_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Draw from the flat Dirichlet law on the simplex of dimension `dim - 1`.
pub fn sample_simplex_uniform<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<ProbabilityVector> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!(
            "simplex sampling needs dim >= 2, got {dim}"
        )));
    }
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect();
        // Exp1 can return exactly 0 with negligible probability; redraw so the
        // point stays interior.
        if draws.iter().all(|&x| x > 0.0) {
            let sum: f64 = draws.iter().sum();
            return Ok(ProbabilityVector(draws.into_iter().map(|x| x / sum).collect()));
        }
    }
}

/// `ln Σ exp(xᵢ)`, stable for arbitrarily negative inputs.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// A simplex point stored as log-probabilities, normalized so that
/// `log_sum_exp(log) == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBelief {
    log: Vec<f64>,
}

impl LogBelief {
    /// Interior points only; a zero component has no finite logarithm.
    pub fn from_probability(p: &ProbabilityVector) -> Result<Self> {
        p.require_interior()?;
        Ok(Self::from_log_weights(p.as_slice().iter().map(|x| x.ln()).collect()))
    }

    /// Normalize arbitrary finite log-weights.
    pub fn from_log_weights(mut log: Vec<f64>) -> Self {
        let z = log_sum_exp(&log);
        for x in &mut log {
            *x -= z;
        }
        Self { log }
    }

    pub fn dim(&self) -> usize {
        self.log.len()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log
    }

    pub fn prob(&self, h: usize) -> f64 {
        self.log[h].exp()
    }

    /// `ln(θ(h) / (1 − θ(h)))` with the complement summed in log space, so the
    /// value stays exact long after `θ(h)` rounds to one.
    pub fn log_odds(&self, h: usize) -> f64 {
        let rest: Vec<f64> = self
            .log
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != h)
            .map(|(_, &x)| x)
            .collect();
        self.log[h] - log_sum_exp(&rest)
    }

    pub fn to_probability(&self) -> ProbabilityVector {
        let p: Vec<f64> = self.log.iter().map(|x| x.exp()).collect();
        let total: f64 = p.iter().sum();
        ProbabilityVector(p.into_iter().map(|x| x / total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let v = normalize_vector(&[0.3, 0.1], 1.0).unwrap();
        assert_abs_diff_eq!(v[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.25, epsilon = 1e-12);
        assert_eq!(normalize_vector(&[0.5, 0.5], 1.0).unwrap(), vec![0.5, 0.5]);
        let v = normalize_vector(&[2.0, 3.0, 5.0], 10.0).unwrap();
        for (a, b) in v.iter().zip([2.0, 3.0, 5.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_zero_mass() {
        assert_eq!(normalize_vector(&[0.0, 0.0], 1.0), Err(Error::DegenerateVector));
        assert_eq!(normalize_vector(&[-1.0, 2.0], 1.0), Err(Error::DegenerateVector));
    }

    #[test]
    fn admission_tolerance() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(ProbabilityVector::new(vec![0.5, 0.5 + 5e-9]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(pv(&[0.2, 0.8]).is_interior());
        assert!(!pv(&[0.0, 1.0]).is_interior());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.5, 0.5])).unwrap(), 0.0);
        // 0.75 ln 1.5 + 0.25 ln 0.5, evaluated with mpmath at 30 digits:
        // 0.130812035941137...
        let kl = kl_divergence(&pv(&[0.75, 0.25]), &pv(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(kl, 0.130812035941137, epsilon = 1e-14);
        let kl = kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(kl, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn kl_support_violation() {
        let err = kl_divergence(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap_err();
        assert_eq!(err, Error::SupportMismatch { index: 1 });
        let err = kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.2, 0.3, 0.5])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_distance(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 2.0);
        let p = pv(&[0.3, 0.7]);
        assert_eq!(l1_distance(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(
            l1_distance(&pv(&[0.6, 0.4]), &pv(&[0.5, 0.5])).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        assert!(l1_distance(&p, &pv(&[1.0])).is_err());
    }

    #[test]
    fn gibbs_inequality_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..1000 {
            let dim = 2 + i % 6;
            let p = sample_simplex_uniform(dim, &mut rng).unwrap();
            let q = sample_simplex_uniform(dim, &mut rng).unwrap();
            let kl = kl_divergence(&p, &q).unwrap();
            let l1 = l1_distance(&p, &q).unwrap();
            assert!(kl >= 0.0);
            assert_eq!(kl == 0.0, l1 < 1e-12);
            assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_sampling_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in [2usize, 3] {
            let mut sums = vec![0.0; dim];
            let draws = 100_000;
            for _ in 0..draws {
                let p = sample_simplex_uniform(dim, &mut rng).unwrap();
                assert!(p.is_interior());
                assert_abs_diff_eq!(p.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                for (s, x) in sums.iter_mut().zip(p.as_slice()) {
                    *s += x;
                }
            }
            for s in sums {
                assert_abs_diff_eq!(s / draws as f64, 1.0 / dim as f64, epsilon = 0.005);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_simplex_uniform(4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_simplex_uniform(4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(sample_simplex_uniform(1, &mut ChaCha8Rng::seed_from_u64(9)).is_err());
    }

    #[test]
    fn log_belief_round_trip_and_odds() {
        let p = pv(&[0.6, 0.3, 0.1]);
        let b = LogBelief::from_probability(&p).unwrap();
        for (a, e) in b.to_probability().as_slice().iter().zip(p.as_slice()) {
            assert_abs_diff_eq!(*a, *e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(b.log_odds(0), (0.6f64 / 0.4).ln(), epsilon = 1e-14);
        // log-odds far beyond double resolution stay exact
        let b = LogBelief::from_log_weights(vec![0.0, -2000.0, -2001.0]);
        let expected = 2000.0 - (1.0 + (-1.0f64).exp()).ln();
        assert_abs_diff_eq!(b.log_odds(0), expected, epsilon = 1e-9);
        assert_eq!(b.prob(0), 1.0);
        assert!(LogBelief::from_probability(&pv(&[1.0, 0.0])).is_err());
    }
}
