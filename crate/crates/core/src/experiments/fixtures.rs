//! Published sample matrices and priors. Literals carry four decimals, so
//! columns and priors are renormalized on load.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, PositiveMatrix};
use crate::simplex::ProbabilityVector;

const M3: [[[f64; 3]; 3]; 5] = [
    [[0.6559, 0.5505, 0.7310], [0.1680, 0.3359, 0.0403], [0.1760, 0.1136, 0.2287]],
    [[0.2461, 0.6600, 0.4310], [0.6785, 0.0655, 0.2325], [0.0754, 0.2746, 0.3365]],
    [[0.7286, 0.1937, 0.7620], [0.0739, 0.4786, 0.1999], [0.1974, 0.3277, 0.0382]],
    [[0.4745, 0.2024, 0.5946], [0.2898, 0.7499, 0.1313], [0.2357, 0.0477, 0.2741]],
    [[0.2207, 0.5466, 0.1605], [0.3828, 0.3807, 0.5697], [0.3965, 0.0727, 0.2698]],
];

const PRIORS3: [[f64; 3]; 5] = [
    [0.3333, 0.3333, 0.3333],
    [0.1937, 0.4291, 0.3771],
    [0.4544, 0.0814, 0.4641],
    [0.5955, 0.2995, 0.1051],
    [0.4771, 0.0593, 0.4636],
];

const M4: [[[f64; 4]; 4]; 3] = [
    [
        [0.3916, 0.2306, 0.0460, 0.0404],
        [0.1408, 0.6350, 0.2139, 0.2310],
        [0.2375, 0.0275, 0.1667, 0.2412],
        [0.2301, 0.1068, 0.5734, 0.4874],
    ],
    [
        [0.3744, 0.6892, 0.0112, 0.3200],
        [0.3204, 0.2320, 0.4498, 0.3530],
        [0.0291, 0.0688, 0.3865, 0.0653],
        [0.2761, 0.0100, 0.1526, 0.2618],
    ],
    [
        [0.2885, 0.0873, 0.2319, 0.1009],
        [0.0653, 0.2239, 0.0575, 0.2584],
        [0.5934, 0.3276, 0.2283, 0.3925],
        [0.0529, 0.3612, 0.4823, 0.2482],
    ],
];

const PRIORS4: [[f64; 4]; 3] = [
    [0.2500, 0.2500, 0.2500, 0.2500],
    [0.1789, 0.3664, 0.2915, 0.1632],
    [0.4460, 0.4676, 0.0821, 0.0043],
];

/// The 2×2 worked example, after column normalization of `[[0.3, 0.3], [0.1, 0.3]]`.
const TWO_BY_TWO: [[f64; 2]; 2] = [[0.3, 0.3], [0.1, 0.3]];

fn load<const N: usize>(rows: &[[f64; N]]) -> PositiveMatrix {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let m = PositiveMatrix::from_rows(&rows).expect("fixture literal is a valid matrix");
    normalize_columns(&m, &vec![1.0; m.cols()]).expect("positive columns")
}

fn load_prior(p: &[f64]) -> ProbabilityVector {
    ProbabilityVector::from_weights(p).expect("fixture prior is positive")
}

/// Every fixture name accepted by [`matrix`].
pub const MATRIX_NAMES: [&str; 9] = ["m1", "m2", "m3", "m4", "m5", "m1p", "m2p", "m3p", "appendix"];
/// Every fixture name accepted by [`prior`].
pub const PRIOR_NAMES: [&str; 8] = ["theta1", "theta2", "theta3", "theta4", "theta5", "theta1p", "theta2p", "theta3p"];

fn canonical(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('\'', "p")
}

/// Look up a matrix fixture: `m1`…`m5` (3×3), `m1p`…`m3p` (4×4, `m1'` also
/// accepted) or `appendix` (2×2).
pub fn matrix(name: &str) -> Result<PositiveMatrix> {
    let key = canonical(name);
    if key == "appendix" {
        return Ok(load(&TWO_BY_TWO));
    }
    let (index, primed) = parse_index(&key, "m")?;
    match (primed, index) {
        (false, 1..=5) => Ok(load(&M3[index - 1])),
        (true, 1..=3) => Ok(load(&M4[index - 1])),
        _ => Err(unknown(name)),
    }
}

/// Look up a prior fixture: `theta1`…`theta5` (or `t1`…) and `theta1p`…`theta3p`.
pub fn prior(name: &str) -> Result<ProbabilityVector> {
    let key = canonical(name);
    let key = key.strip_prefix("theta").map(|s| format!("t{s}")).unwrap_or(key);
    let (index, primed) = parse_index(&key, "t")?;
    match (primed, index) {
        (false, 1..=5) => Ok(load_prior(&PRIORS3[index - 1])),
        (true, 1..=3) => Ok(load_prior(&PRIORS4[index - 1])),
        _ => Err(unknown(name)),
    }
}

fn parse_index(key: &str, prefix: &str) -> Result<(usize, bool)> {
    let rest = key.strip_prefix(prefix).ok_or_else(|| unknown(key))?;
    let (digits, primed) = match rest.strip_suffix('p') {
        Some(d) => (d, true),
        None => (rest, false),
    };
    let index = digits.parse::<usize>().map_err(|_| unknown(key))?;
    Ok((index, primed))
}

fn unknown(name: &str) -> Error {
    Error::InvalidConfig(format!("unknown fixture {name:?}"))
}

/// All fixtures, renormalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureSet {
    pub matrices_3x3: Vec<PositiveMatrix>,
    pub priors_3: Vec<ProbabilityVector>,
    pub matrices_4x4: Vec<PositiveMatrix>,
    pub priors_4: Vec<ProbabilityVector>,
}

impl FixtureSet {
    pub fn load() -> Self {
        Self {
            matrices_3x3: M3.iter().map(|m| load(m)).collect(),
            priors_3: PRIORS3.iter().map(|p| load_prior(p)).collect(),
            matrices_4x4: M4.iter().map(|m| load(m)).collect(),
            priors_4: PRIORS4.iter().map(|p| load_prior(p)).collect(),
        }
    }
}
