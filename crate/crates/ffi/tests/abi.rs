use std::ffi::CStr;
use std::ptr;

use scbi_ffi::*;

fn matrix(rows: usize, cols: usize, data: &[f64]) -> *mut ScbiMatrix {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { scbi_matrix_new(rows, cols, data.as_ptr(), &mut m) }, ScbiStatus::Ok);
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(scbi_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn sinkhorn_through_the_abi() {
    let m = matrix(2, 2, &[0.75, 0.5, 0.25, 0.5]);
    let mut scaled = ptr::null_mut();
    let ones = [1.0, 1.0];
    let status = unsafe { scbi_sinkhorn(m, ones.as_ptr(), 2, ones.as_ptr(), 2, 0.0, 0, &mut scaled) };
    assert_eq!(status, ScbiStatus::Ok);
    let (mut r, mut c) = (0, 0);
    assert_eq!(unsafe { scbi_matrix_shape(scaled, &mut r, &mut c) }, ScbiStatus::Ok);
    assert_eq!((r, c), (2, 2));
    let mut out = [0.0; 4];
    assert_eq!(unsafe { scbi_matrix_copy(scaled, out.as_mut_ptr(), 4) }, ScbiStatus::Ok);
    let a = 3f64.sqrt() / (1.0 + 3f64.sqrt());
    for (x, e) in out.iter().zip([a, 1.0 - a, 1.0 - a, a]) {
        assert!((x - e).abs() < 1e-10, "{out:?}");
    }
    unsafe {
        scbi_matrix_free(scaled);
        scbi_matrix_free(m);
    }
}

#[test]
fn updates_and_rates() {
    let m = matrix(2, 2, &[0.75, 0.5, 0.25, 0.5]);
    let mut theta = [0.5, 0.5];
    assert_eq!(unsafe { scbi_bi_update(m, theta.as_ptr(), 2, 0, theta.as_mut_ptr()) }, ScbiStatus::Ok);
    assert!((theta[0] - 0.6).abs() < 1e-12);
    let mut coop = [0.5, 0.5];
    assert_eq!(unsafe { scbi_scbi_update(m, coop.as_ptr(), 2, 0, coop.as_mut_ptr()) }, ScbiStatus::Ok);
    assert!((coop[0] - 0.634).abs() < 1e-3);

    let (mut rate, mut argmin) = (0.0, usize::MAX);
    assert_eq!(unsafe { scbi_roc_bi(m, 0, &mut rate, &mut argmin) }, ScbiStatus::Ok);
    assert_eq!(argmin, 1);
    let expected = 0.75 * (0.75f64 / 0.5).ln() + 0.25 * (0.25f64 / 0.5).ln();
    assert!((rate - expected).abs() < 1e-12);
    assert_eq!(unsafe { scbi_roc_scbi(m, 0, &mut rate, ptr::null_mut()) }, ScbiStatus::Ok);
    assert!(rate > 0.0);
    unsafe { scbi_matrix_free(m) };
}

#[test]
fn episodes_are_seeded() {
    let m = matrix(2, 2, &[0.75, 0.5, 0.25, 0.5]);
    let prior = [0.5, 0.5];
    let run = |seed| {
        let mut e = ptr::null_mut();
        let s = unsafe {
            scbi_episode_run(m, ptr::null(), prior.as_ptr(), ptr::null(), 2, 0, 20, ScbiMode::Scbi, seed, &mut e)
        };
        assert_eq!(s, ScbiStatus::Ok);
        assert_eq!(unsafe { scbi_episode_rounds(e) }, 20);
        let mut data = vec![0usize; 20];
        assert_eq!(unsafe { scbi_episode_data(e, data.as_mut_ptr(), 20) }, ScbiStatus::Ok);
        let mut last = [0.0; 2];
        assert_eq!(unsafe { scbi_episode_learner_posterior(e, 20, last.as_mut_ptr(), 2) }, ScbiStatus::Ok);
        let mut teacher = [0.0; 2];
        assert_eq!(unsafe { scbi_episode_teacher_posterior(e, 20, teacher.as_mut_ptr(), 2) }, ScbiStatus::Ok);
        assert_eq!(last, teacher);
        let mut lo = 0.0;
        assert_eq!(unsafe { scbi_episode_learner_log_odds(e, 20, &mut lo) }, ScbiStatus::Ok);
        assert!((lo - (last[0] / last[1]).ln()).abs() < 1e-6);
        assert_eq!(
            unsafe { scbi_episode_learner_posterior(e, 21, last.as_mut_ptr(), 2) },
            ScbiStatus::IndexOutOfRange
        );
        unsafe { scbi_episode_free(e) };
        data
    };
    assert_eq!(run(5), run(5));
    unsafe { scbi_matrix_free(m) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    let bad = [1.0, -1.0];
    assert_eq!(unsafe { scbi_matrix_new(1, 2, bad.as_ptr(), &mut m) }, ScbiStatus::InvalidMatrix);
    assert!(m.is_null());
    assert!(last_error().starts_with("InvalidMatrix"));

    assert_eq!(unsafe { scbi_matrix_new(1, 2, ptr::null(), &mut m) }, ScbiStatus::NullPointer);
    assert!(last_error().contains("data"));

    let m = matrix(2, 2, &[0.75, 0.5, 0.25, 0.5]);
    let mut out = [0.0; 3];
    assert_eq!(unsafe { scbi_matrix_copy(m, out.as_mut_ptr(), 3) }, ScbiStatus::DimensionMismatch);
    let theta = [1.0, 0.0];
    assert_eq!(
        unsafe { scbi_scbi_update(m, theta.as_ptr(), 2, 0, out.as_mut_ptr()) },
        ScbiStatus::BoundaryPrior
    );
    let name = unsafe { CStr::from_ptr(scbi_status_name(ScbiStatus::BoundaryPrior)) };
    assert_eq!(name.to_str().unwrap(), "BoundaryPrior");
    unsafe {
        scbi_matrix_free(m);
        scbi_matrix_free(ptr::null_mut());
        scbi_episode_free(ptr::null_mut());
    }
    assert_eq!(unsafe { scbi_episode_rounds(ptr::null()) }, 0);
}
