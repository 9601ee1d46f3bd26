//! C ABI over the `scbi` library.
//!
//! Matrices and episode traces are opaque handles created and freed by this
//! library. Every fallible function returns an [`ScbiStatus`]; on failure the
//! message is available from [`scbi_last_error_message`] on the same thread.
//! Matrices are passed row-major, hypotheses are columns and indices are
//! zero-based.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scbi::estimators::{self, EpisodeConfig, EpisodeTrace, Mode};
use scbi::matrix::{MarginalSpec, PositiveMatrix};
use scbi::simplex::ProbabilityVector;
use scbi::sinkhorn::{sinkhorn_scale, SinkhornConfig};
use scbi::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScbiStatus {
    Ok = 0,
    NullPointer = 1,
    DegenerateVector = 2,
    SupportMismatch = 3,
    DimensionMismatch = 4,
    InvalidProbability = 5,
    InvalidMatrix = 6,
    MarginalMismatch = 7,
    NonConvergence = 8,
    BoundaryPrior = 9,
    IndexOutOfRange = 10,
    TooFewHypotheses = 11,
    TooManyAtoms = 12,
    Underflow = 13,
    InvalidConfig = 14,
    Parse = 15,
    Io = 16,
    Panic = 17,
}

/// Learning rule for episodes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScbiMode {
    Bi = 0,
    Scbi = 1,
}

/// Opaque positive matrix.
pub struct ScbiMatrix(PositiveMatrix);

/// Opaque record of one teaching episode.
pub struct ScbiEpisode(EpisodeTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ScbiStatus {
    match e {
        Error::DegenerateVector => ScbiStatus::DegenerateVector,
        Error::SupportMismatch { .. } => ScbiStatus::SupportMismatch,
        Error::DimensionMismatch { .. } => ScbiStatus::DimensionMismatch,
        Error::InvalidProbability(_) => ScbiStatus::InvalidProbability,
        Error::InvalidMatrix(_) => ScbiStatus::InvalidMatrix,
        Error::MarginalMismatch { .. } => ScbiStatus::MarginalMismatch,
        Error::NonConvergence { .. } => ScbiStatus::NonConvergence,
        Error::BoundaryPrior { .. } => ScbiStatus::BoundaryPrior,
        Error::IndexOutOfRange { .. } => ScbiStatus::IndexOutOfRange,
        Error::TooFewHypotheses(_) => ScbiStatus::TooFewHypotheses,
        Error::TooManyAtoms { .. } => ScbiStatus::TooManyAtoms,
        Error::Underflow(_) => ScbiStatus::Underflow,
        Error::InvalidConfig(_) => ScbiStatus::InvalidConfig,
        Error::Parse(_) => ScbiStatus::Parse,
        Error::Io(_) => ScbiStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Domain(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Domain(e)
    }
}

type FfiResult<T> = Result<T, Fail>;

/// Run `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> ScbiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScbiStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            ScbiStatus::NullPointer
        }
        Ok(Err(Fail::Domain(e))) => {
            set_last_error(&format!("{}: {e}", e.name()));
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            ScbiStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> FfiResult<&'a mut [f64]> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn matrix_ref<'a>(m: *const ScbiMatrix, what: &'static str) -> FfiResult<&'a PositiveMatrix> {
    m.as_ref().map(|m| &m.0).ok_or(Fail::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

fn copy_into(src: &[f64], dst: &mut [f64]) -> FfiResult<()> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch { expected: src.len(), found: dst.len() }.into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn scbi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn scbi_status_name(status: ScbiStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        ScbiStatus::Ok => b"Ok\0",
        ScbiStatus::NullPointer => b"NullPointer\0",
        ScbiStatus::DegenerateVector => b"DegenerateVector\0",
        ScbiStatus::SupportMismatch => b"SupportMismatch\0",
        ScbiStatus::DimensionMismatch => b"DimensionMismatch\0",
        ScbiStatus::InvalidProbability => b"InvalidProbability\0",
        ScbiStatus::InvalidMatrix => b"InvalidMatrix\0",
        ScbiStatus::MarginalMismatch => b"MarginalMismatch\0",
        ScbiStatus::NonConvergence => b"NonConvergence\0",
        ScbiStatus::BoundaryPrior => b"BoundaryPrior\0",
        ScbiStatus::IndexOutOfRange => b"IndexOutOfRange\0",
        ScbiStatus::TooFewHypotheses => b"TooFewHypotheses\0",
        ScbiStatus::TooManyAtoms => b"TooManyAtoms\0",
        ScbiStatus::Underflow => b"Underflow\0",
        ScbiStatus::InvalidConfig => b"InvalidConfig\0",
        ScbiStatus::Parse => b"Parse\0",
        ScbiStatus::Io => b"Io\0",
        ScbiStatus::Panic => b"Panic\0",
    };
    name.as_ptr().cast()
}

/// Build a `rows × cols` matrix from row-major `data`.
///
/// # Safety
/// `data` must point to `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scbi_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut ScbiMatrix,
) -> ScbiStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or_else(|| Error::InvalidMatrix("shape overflows".into()))?;
        let values = slice(data, len, "data")?.to_vec();
        let m = PositiveMatrix::new(rows, cols, values)?;
        write_out(out, Box::into_raw(Box::new(ScbiMatrix(m))), "out")
    })
}

/// Release a matrix. Null is ignored.
///
/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scbi_matrix_free(m: *mut ScbiMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live matrix; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scbi_matrix_shape(m: *const ScbiMatrix, rows: *mut usize, cols: *mut usize) -> ScbiStatus {
    guard(|| {
        let (r, c) = matrix_ref(m, "matrix")?.shape();
        write_out(rows, r, "rows")?;
        write_out(cols, c, "cols")
    })
}

/// Copy the entries, row-major, into `out` of length `len = rows * cols`.
///
/// # Safety
/// `m` must be a live matrix; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scbi_matrix_copy(m: *const ScbiMatrix, out: *mut f64, len: usize) -> ScbiStatus {
    guard(|| copy_into(matrix_ref(m, "matrix")?.as_slice(), slice_mut(out, len, "out")?))
}

/// Scale `m` so its rows sum to `row_sums` and its columns to `col_sums`.
/// `tolerance <= 0` and `max_iterations == 0` select the defaults.
///
/// # Safety
/// Array arguments must hold the stated number of doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn scbi_sinkhorn(
    m: *const ScbiMatrix,
    row_sums: *const f64,
    n_rows: usize,
    col_sums: *const f64,
    n_cols: usize,
    tolerance: f64,
    max_iterations: usize,
    out: *mut *mut ScbiMatrix,
) -> ScbiStatus {
    guard(|| {
        let m = matrix_ref(m, "matrix")?;
        let marginals = MarginalSpec::new(
            slice(row_sums, n_rows, "row_sums")?.to_vec(),
            slice(col_sums, n_cols, "col_sums")?.to_vec(),
        )?;
        let defaults = SinkhornConfig::default();
        let cfg = SinkhornConfig {
            tolerance: if tolerance > 0.0 { tolerance } else { defaults.tolerance },
            max_iterations: if max_iterations > 0 { max_iterations } else { defaults.max_iterations },
        };
        let scaled = sinkhorn_scale(m, &marginals, &cfg)?.scaled;
        write_out(out, Box::into_raw(Box::new(ScbiMatrix(scaled))), "out")
    })
}

unsafe fn update(
    mode: ScbiMode,
    m: *const ScbiMatrix,
    theta: *const f64,
    len: usize,
    datum: usize,
    out: *mut f64,
) -> ScbiStatus {
    guard(|| {
        let m = matrix_ref(m, "matrix")?;
        let theta = ProbabilityVector::new(slice(theta, len, "theta")?.to_vec())?;
        let next = match mode {
            ScbiMode::Bi => estimators::bi_update(m, &theta, datum)?,
            ScbiMode::Scbi => estimators::scbi_update(m, &theta, datum)?,
        };
        copy_into(next.as_slice(), slice_mut(out, len, "out")?)
    })
}

/// Bayesian posterior after observing row `datum`. `theta` and `out` have
/// one entry per column and may alias.
///
/// # Safety
/// `theta` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scbi_bi_update(
    m: *const ScbiMatrix,
    theta: *const f64,
    len: usize,
    datum: usize,
    out: *mut f64,
) -> ScbiStatus {
    update(ScbiMode::Bi, m, theta, len, datum, out)
}

/// Cooperative posterior after observing row `datum`.
///
/// # Safety
/// As [`scbi_bi_update`].
#[no_mangle]
pub unsafe extern "C" fn scbi_scbi_update(
    m: *const ScbiMatrix,
    theta: *const f64,
    len: usize,
    datum: usize,
    out: *mut f64,
) -> ScbiStatus {
    update(ScbiMode::Scbi, m, theta, len, datum, out)
}

/// Asymptotic Bayesian rate toward hypothesis `h` and its minimizing column.
///
/// # Safety
/// `rate` and `argmin` must be writable; `argmin` may be null.
#[no_mangle]
pub unsafe extern "C" fn scbi_roc_bi(m: *const ScbiMatrix, h: usize, rate: *mut f64, argmin: *mut usize) -> ScbiStatus {
    guard(|| {
        let (r, j) = estimators::roc_bi(matrix_ref(m, "matrix")?, h)?;
        write_out(rate, r, "rate")?;
        if !argmin.is_null() {
            argmin.write(j);
        }
        Ok(())
    })
}

/// Asymptotic cooperative rate toward hypothesis `h` and its minimizing column.
///
/// # Safety
/// As [`scbi_roc_bi`].
#[no_mangle]
pub unsafe extern "C" fn scbi_roc_scbi(
    m: *const ScbiMatrix,
    h: usize,
    rate: *mut f64,
    argmin: *mut usize,
) -> ScbiStatus {
    guard(|| {
        let (r, j, _) = estimators::roc_scbi(matrix_ref(m, "matrix")?, h)?;
        write_out(rate, r, "rate")?;
        if !argmin.is_null() {
            argmin.write(j);
        }
        Ok(())
    })
}

/// Run one seeded episode of `rounds` rounds toward hypothesis `h`. A null
/// `learner` or `learner_prior` means the teacher's.
///
/// # Safety
/// Matrices must be live; priors must hold one double per column.
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_run(
    teacher: *const ScbiMatrix,
    learner: *const ScbiMatrix,
    teacher_prior: *const f64,
    learner_prior: *const f64,
    len: usize,
    h: usize,
    rounds: usize,
    mode: ScbiMode,
    seed: u64,
    out: *mut *mut ScbiEpisode,
) -> ScbiStatus {
    guard(|| {
        let t = matrix_ref(teacher, "teacher")?.clone();
        let l = if learner.is_null() { t.clone() } else { matrix_ref(learner, "learner")?.clone() };
        let tp = ProbabilityVector::new(slice(teacher_prior, len, "teacher_prior")?.to_vec())?;
        let lp = if learner_prior.is_null() {
            tp.clone()
        } else {
            ProbabilityVector::new(slice(learner_prior, len, "learner_prior")?.to_vec())?
        };
        let cfg = EpisodeConfig {
            teacher_matrix: t,
            learner_matrix: l,
            teacher_prior: tp,
            learner_prior: lp,
            true_hypothesis: h,
            rounds,
            mode: match mode {
                ScbiMode::Bi => Mode::Bi,
                ScbiMode::Scbi => Mode::Scbi,
            },
            seed,
        };
        let trace = estimators::run_episode(&cfg)?;
        write_out(out, Box::into_raw(Box::new(ScbiEpisode(trace))), "out")
    })
}

/// Release an episode. Null is ignored.
///
/// # Safety
/// `e` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_free(e: *mut ScbiEpisode) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Number of rounds played; returns 0 for null.
///
/// # Safety
/// `e` must be null or a live episode.
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_rounds(e: *const ScbiEpisode) -> usize {
    e.as_ref().map_or(0, |e| e.0.data.len())
}

/// Copy the data indices, one per round, into `out`.
///
/// # Safety
/// `out` must hold `len` values, `len` equal to the number of rounds.
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_data(e: *const ScbiEpisode, out: *mut usize, len: usize) -> ScbiStatus {
    guard(|| {
        let e = e.as_ref().ok_or(Fail::Null("episode"))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        if len != e.0.data.len() {
            return Err(Error::DimensionMismatch { expected: e.0.data.len(), found: len }.into());
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&e.0.data);
        Ok(())
    })
}

unsafe fn posterior(e: *const ScbiEpisode, learner: bool, round: usize, out: *mut f64, len: usize) -> ScbiStatus {
    guard(|| {
        let e = &e.as_ref().ok_or(Fail::Null("episode"))?.0;
        let list = if learner { &e.learner_posteriors } else { &e.teacher_posteriors };
        let p = list.get(round).ok_or(Error::IndexOutOfRange { index: round, len: list.len() })?;
        copy_into(p.as_slice(), slice_mut(out, len, "out")?)
    })
}

/// Learner posterior after `round` rounds (0 is the prior).
///
/// # Safety
/// `out` must hold `len` doubles, one per hypothesis.
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_learner_posterior(
    e: *const ScbiEpisode,
    round: usize,
    out: *mut f64,
    len: usize,
) -> ScbiStatus {
    posterior(e, true, round, out, len)
}

/// The teacher's simulated learner state after `round` rounds.
///
/// # Safety
/// As [`scbi_episode_learner_posterior`].
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_teacher_posterior(
    e: *const ScbiEpisode,
    round: usize,
    out: *mut f64,
    len: usize,
) -> ScbiStatus {
    posterior(e, false, round, out, len)
}

/// Exact log-odds of the true hypothesis in the learner's state after
/// `round` rounds.
///
/// # Safety
/// `e` must be a live episode; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn scbi_episode_learner_log_odds(e: *const ScbiEpisode, round: usize, out: *mut f64) -> ScbiStatus {
    guard(|| {
        let e = &e.as_ref().ok_or(Fail::Null("episode"))?.0;
        let v = *e
            .learner_log_odds
            .get(round)
            .ok_or(Error::IndexOutOfRange { index: round, len: e.learner_log_odds.len() })?;
        write_out(out, v, "out")
    })
}
