//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line (bypassing
//! output capture) and then asserts. Tests hold a shared lock so the reported
//! runtimes are not inflated by each other.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use scbi::estimators::{bi_update, roc_bi, roc_scbi, run_episode, run_episode_forced, EpisodeConfig, Mode};
use scbi::experiments::fixtures;
use scbi::experiments::stability::PriorScheme;
use scbi::experiments::{
    e_closed_form_two_column, prior_perturbation_sweep, roc_comparison, Manifest, PriorSweepConfig,
};
use scbi::gridworld::{build_cell_likelihood, start_teacher_closed_form, GridWorldConfig};
use scbi::matrix::{normalize_columns, sample_column_stochastic, MarginalSpec, PositiveMatrix};
use scbi::measure::{
    exact_distribution, expectation, psi_step, psi_uniform_step, successful_rate, AtomicMeasure, Functional,
    SuccessRateConfig,
};
use scbi::seed::{episode_seed, rng_from_seed, task_seed};
use scbi::simplex::{sample_simplex_uniform, ProbabilityVector};
use scbi::sinkhorn::{sinkhorn_scale, SinkhornConfig};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, title: &str, ok: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let pass = ok && elapsed <= limit;
    let line = format!(
        "{} criterion {id:>2}: {title}: {detail} [{:.2} s, limit {} s]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_appendix_golden_values() {
    let _g = serial();
    let t0 = Instant::now();
    let m = fixtures::matrix("appendix").unwrap();
    let cfg = SinkhornConfig::default();
    let ones = MarginalSpec::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
    let limit = sinkhorn_scale(&m, &ones, &cfg).unwrap().scaled;
    let e1 = max_abs(limit.as_slice(), &[0.634, 0.366, 0.366, 0.634]);

    let uniform = ProbabilityVector::uniform(2);
    let bi = run_episode_forced(&EpisodeConfig::matched(m.clone(), uniform.clone(), 0, 2, Mode::Bi, 0), &[0, 0]).unwrap();
    let sc = run_episode_forced(&EpisodeConfig::matched(m.clone(), uniform, 0, 2, Mode::Scbi, 0), &[0, 0]).unwrap();
    let e_bi = max_abs(bi.learner_posteriors[1].as_slice(), &[0.6, 0.4])
        .max(max_abs(bi.learner_posteriors[2].as_slice(), &[0.692, 0.308]));
    let e_sc = max_abs(sc.learner_posteriors[1].as_slice(), &[0.634, 0.366])
        .max(max_abs(sc.learner_posteriors[2].as_slice(), &[0.758, 0.242]));

    // second-round scaling: rows to one, columns to 2·θ₁
    let theta1 = &sc.learner_posteriors[1];
    let spec = MarginalSpec::new(vec![1.0, 1.0], theta1.as_slice().iter().map(|t| 2.0 * t).collect()).unwrap();
    let round2 = sinkhorn_scale(&m, &spec, &cfg).unwrap().scaled;
    let e2 = max_abs(round2.as_slice(), &[0.758, 0.242, 0.51, 0.49]);

    let ok = e1 <= 1e-3 && e_bi <= 1e-3 && e_sc <= 1e-3 && e2 <= 1e-2;
    let detail = format!(
        "limit err {e1:.1e} (tol 1e-3), round-2 matrix err {e2:.1e} (tol 1e-2), BI err {e_bi:.1e}, SCBI err {e_sc:.1e} (tol 1e-3)"
    );
    report(1, "appendix golden values", ok, &detail, t0.elapsed(), secs(1));
}

#[test]
fn criterion_02_gridworld_closed_form() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = rng_from_seed(20);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let gamma = rng.random_range(0.5..0.99);
        let cfg = GridWorldConfig { gamma, ..Default::default() };
        let m = build_cell_likelihood(&cfg, cfg.start).unwrap();
        let spec = MarginalSpec::new(vec![2.0 / 3.0; 3], vec![1.0, 1.0]).unwrap();
        let scaled = sinkhorn_scale(&m, &spec, &SinkhornConfig::default()).unwrap().scaled;
        let expected: Vec<f64> = start_teacher_closed_form(gamma).iter().flatten().copied().collect();
        worst = worst.max(max_abs(scaled.as_slice(), &expected));
    }
    let detail = format!("max error {worst:.1e} over 20 discounts (tol 1e-9)");
    report(2, "grid-world teacher closed form", worst <= 1e-9, &detail, t0.elapsed(), secs(1));
}

#[test]
fn criterion_03_bi_rate_of_convergence() {
    let _g = serial();
    let t0 = Instant::now();
    let rounds = 5000;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, name) in ["m1", "m2", "m3", "m4", "m5"].iter().enumerate() {
        let m = fixtures::matrix(name).unwrap();
        let cfg = EpisodeConfig::matched(m.clone(), ProbabilityVector::uniform(3), 0, rounds, Mode::Bi, 300 + i as u64);
        let trace = run_episode(&cfg).unwrap();
        let slope = trace.learner_log_odds[rounds] / rounds as f64;
        let rate = roc_bi(&m, 0).unwrap().0;
        let rel = (slope - rate).abs() / rate;
        worst = worst.max(rel);
        parts.push(format!("{name} {slope:.4}/{rate:.4}"));
    }
    let detail = format!("{}; worst relative error {:.2}% (tol 5%)", parts.join(", "), 100.0 * worst);
    report(3, "BI rate of convergence", worst <= 0.05, &detail, t0.elapsed(), secs(10));
}

#[test]
fn criterion_04_scbi_rate_of_convergence() {
    let _g = serial();
    let t0 = Instant::now();
    let (rounds, episodes) = (2000, 200u64);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, name) in ["m1", "m2", "m3"].iter().enumerate() {
        let m = fixtures::matrix(name).unwrap();
        let base = task_seed(400, i as u64);
        let slopes: Vec<f64> = (0..episodes)
            .into_par_iter()
            .map(|e| {
                let cfg = EpisodeConfig::matched(
                    m.clone(),
                    ProbabilityVector::uniform(3),
                    0,
                    rounds,
                    Mode::Scbi,
                    episode_seed(base, e),
                );
                run_episode(&cfg).unwrap().learner_log_odds[rounds] / rounds as f64
            })
            .collect();
        let mean = slopes.iter().sum::<f64>() / episodes as f64;
        let rate = roc_scbi(&m, 0).unwrap().0;
        let rel = (mean - rate).abs() / rate;
        worst = worst.max(rel);
        parts.push(format!("{name} {mean:.4}/{rate:.4}"));
    }
    let detail = format!("{}; worst relative error {:.2}% (tol 10%)", parts.join(", "), 100.0 * worst);
    report(4, "SCBI rate of convergence", worst <= 0.10, &detail, t0.elapsed(), secs(300));
}

fn random_instance(rng: &mut scbi::seed::SimRng) -> (PositiveMatrix, ProbabilityVector, usize) {
    let m = rng.random_range(2..=4);
    let n = rng.random_range(m..=5);
    let matrix = sample_column_stochastic(n, m, rng).unwrap();
    let prior = sample_simplex_uniform(m, rng).unwrap();
    let h = rng.random_range(0..m);
    (matrix, prior, h)
}

#[test]
fn criterion_05_lemma_properties() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = rng_from_seed(500);
    let (mut monotone_fail, mut ratio_err, mut linear_err, mut uniform_err, mut order_err, mut cross_err) =
        (0usize, 0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..1000 {
        let (m, theta, h) = random_instance(&mut rng);
        let dirac = AtomicMeasure::dirac(theta.clone());
        let next = psi_step(&m, h, &dirac).unwrap();

        let mean_h = expectation(&next, Functional::Component(h)).unwrap();
        monotone_fail += usize::from(mean_h < theta.get(h) - 1e-12);

        for j in (0..m.cols()).filter(|&j| j != h) {
            let got = expectation(&next, Functional::Ratio { numerator: j, denominator: h }).unwrap();
            let want = theta.get(j) / theta.get(h);
            ratio_err = ratio_err.max((got - want).abs() / want.max(1.0));
        }

        let other = sample_simplex_uniform(m.cols(), &mut rng).unwrap();
        let nu = AtomicMeasure::dirac(other);
        let a: f64 = rng.random_range(0.05..0.95);
        let lhs = psi_step(&m, h, &AtomicMeasure::mix(&[(a, &dirac), (1.0 - a, &nu)]).unwrap()).unwrap();
        let rhs = AtomicMeasure::mix(&[(a, &next), (1.0 - a, &psi_step(&m, h, &nu).unwrap())]).unwrap();
        linear_err = linear_err.max(lhs.canonical_distance(&rhs));

        let spread = psi_uniform_step(&m, &next).unwrap();
        for j in 0..m.cols() {
            let before = expectation(&next, Functional::Component(j)).unwrap();
            let after = expectation(&spread, Functional::Component(j)).unwrap();
            uniform_err = uniform_err.max((before - after).abs());
        }

        let mut data: Vec<usize> = (0..10).map(|_| rng.random_range(0..m.rows())).collect();
        let forward = data.iter().try_fold(theta.clone(), |t, &d| bi_update(&m, &t, d)).unwrap();
        data.shuffle(&mut rng);
        let shuffled = data.iter().try_fold(theta.clone(), |t, &d| bi_update(&m, &t, d)).unwrap();
        order_err = order_err.max(max_abs(forward.as_slice(), shuffled.as_slice()));

        let raw: Vec<f64> = (0..m.rows() * m.cols()).map(|_| rng.random_range(0.05..1.0)).collect();
        let raw = PositiveMatrix::new(m.rows(), m.cols(), raw).unwrap();
        let r = sample_simplex_uniform(m.rows(), &mut rng).unwrap();
        let c = sample_simplex_uniform(m.cols(), &mut rng).unwrap();
        let spec = MarginalSpec::new(r.into_vec(), c.into_vec()).unwrap();
        let scaled = sinkhorn_scale(&raw, &spec, &SinkhornConfig::default()).unwrap().scaled;
        for (x, y) in raw.cross_ratios().iter().zip(scaled.cross_ratios()) {
            cross_err = cross_err.max((x - y).abs() / x.abs());
        }
    }
    let ok = monotone_fail == 0
        && ratio_err <= 1e-8
        && linear_err <= 1e-10
        && uniform_err <= 1e-10
        && order_err <= 1e-10
        && cross_err <= 1e-10;
    let detail = format!(
        "monotone failures {monotone_fail}, ratio {ratio_err:.1e} (1e-8), linearity {linear_err:.1e}, \
         uniform expectations {uniform_err:.1e}, BI order {order_err:.1e}, cross-ratio {cross_err:.1e} (1e-10)"
    );
    report(5, "lemma property suite", ok, &detail, t0.elapsed(), secs(120));
}

#[test]
fn criterion_06_exact_tree_matches_sampling() {
    let _g = serial();
    let t0 = Instant::now();
    let m = fixtures::matrix("m1").unwrap();
    let (n, k, episodes) = (m.rows(), 3usize, 1_000_000u64);
    let uniform = ProbabilityVector::uniform(3);
    let exact = exact_distribution(&m, 0, &uniform, k).unwrap();
    let exact_mean = expectation(&exact, Functional::Component(0)).unwrap();

    let base = 600;
    let (counts, sum, sum_sq) = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let cfg = EpisodeConfig::matched(m.clone(), uniform.clone(), 0, k, Mode::Scbi, episode_seed(base, e));
            let trace = run_episode(&cfg).unwrap();
            let path = trace.data.iter().fold(0, |acc, &d| acc * n + d);
            (path, trace.learner_posteriors[k].get(0))
        })
        .fold(
            || (vec![0u64; n.pow(k as u32)], 0.0, 0.0),
            |(mut c, s, s2), (path, x)| {
                c[path] += 1;
                (c, s + x, s2 + x * x)
            },
        )
        .reduce(
            || (vec![0u64; n.pow(k as u32)], 0.0, 0.0),
            |(mut a, s, s2), (b, t, t2)| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                (a, s + t, s2 + t2)
            },
        );
    let nf = episodes as f64;
    let mean = sum / nf;
    let se = ((sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0) / nf).sqrt();
    let tv = 0.5
        * exact
            .atoms()
            .iter()
            .zip(&counts)
            .map(|(a, &c)| (a.weight - c as f64 / nf).abs())
            .sum::<f64>();
    let z = (mean - exact_mean).abs() / se;
    let ok = z <= 3.0 && tv <= 0.01 && exact.len() == 27;
    let detail = format!(
        "E[θ(h)] exact {exact_mean:.6} vs sampled {mean:.6} ({z:.2} SE, tol 3); total variation {tv:.1e} (tol 0.01)"
    );
    report(6, "exact distribution vs sampled episodes", ok, &detail, t0.elapsed(), secs(120));
}

#[test]
fn criterion_07_sample_efficiency_direction() {
    let _g = serial();
    let t0 = Instant::now();
    let shapes = [(2, 2), (10, 2), (10, 10)];
    let results: Vec<_> = shapes.iter().map(|&(r, c)| roc_comparison(r, c, 100_000, 700).unwrap()).collect();
    let mut ok = results[1].averaged.p_hat > results[0].averaged.p_hat;
    let mut parts = Vec::new();
    for r in &results {
        let a = r.averaged;
        ok &= a.e_hat > 0.0 && a.p_hat > 0.5;
        parts.push(format!(
            "{}x{}: P {:.4} E {:.4} (first hypothesis P {:.4} E {:.4})",
            r.rows, r.cols, a.p_hat, a.e_hat, r.first_hypothesis.p_hat, r.first_hypothesis.e_hat
        ));
    }
    let detail = format!("{}; need E > 0, P > 0.5, P(10x2) > P(2x2)", parts.join("; "));
    report(7, "sample-efficiency direction", ok, &detail, t0.elapsed(), secs(300));
}

#[test]
fn criterion_08_two_column_reduction() {
    let _g = serial();
    let t0 = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, n) in [2usize, 5].into_iter().enumerate() {
        let closed = e_closed_form_two_column(n, 1_000_000, 800 + i as u64).unwrap();
        let sampled = roc_comparison(n, 2, 100_000, 810 + i as u64).unwrap().averaged;
        let se = (closed.std_error.powi(2) + sampled.e_std_error.powi(2)).sqrt();
        let z = (closed.value - sampled.e_hat).abs() / se;
        ok &= z <= 3.0;
        parts.push(format!("n={n}: reduction {:.5} vs sampled {:.5} ({z:.2} SE)", closed.value, sampled.e_hat));
    }
    let detail = format!("{} (tol 3 combined SE)", parts.join("; "));
    report(8, "two-column reduction", ok, &detail, t0.elapsed(), secs(180));
}

#[test]
fn criterion_09_consistency_of_successful_rate() {
    let _g = serial();
    let t0 = Instant::now();
    let m = fixtures::matrix("m3").unwrap();
    let prior = fixtures::prior("theta1").unwrap();
    let cfg = EpisodeConfig::matched(m, prior, 0, 0, Mode::Scbi, 900);
    let est = successful_rate(&cfg, &SuccessRateConfig { episodes: 1000, ..Default::default() }).unwrap();
    let ok = (est.value - 1.0).abs() <= 3.0 * est.std_error;
    let detail = format!(
        "estimate {} ± {:.1e}, capped fraction {} (need within 3 SE of 1)",
        est.value, est.std_error, est.capped_fraction
    );
    report(9, "consistency of the successful rate", ok, &detail, t0.elapsed(), secs(60));
}

#[test]
fn criterion_10_prior_perturbation_linearity() {
    let _g = serial();
    let t0 = Instant::now();
    let cfg = PriorSweepConfig {
        label: "m3".into(),
        matrix: fixtures::matrix("m3").unwrap(),
        teacher_prior: fixtures::prior("theta1").unwrap(),
        hypothesis: 0,
        scheme: PriorScheme::Rays { directions: 6, radii: (1..=5).map(|i| 0.014 * i as f64).collect() },
        rate: SuccessRateConfig { episodes: 500, ..Default::default() },
        seed: 1000,
    };
    let result = prior_perturbation_sweep(&cfg).unwrap();
    let good = result.ray_fits.iter().filter(|(_, f)| f.r_squared > 0.85).count();
    let r2: Vec<String> = result.ray_fits.iter().map(|(r, f)| format!("ray {r} {:.3}", f.r_squared)).collect();
    let detail = format!(
        "R² {}; {good}/6 rays above 0.85 (need 5); bound violations {} of {} points (reported); {} skipped",
        r2.join(", "),
        result.bound_violations(),
        result.points.len(),
        result.skipped
    );
    report(10, "prior-perturbation linearity", good >= 5, &detail, t0.elapsed(), secs(1200));
}

fn scbi(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_scbi")).args(args).output().unwrap()
}

fn outputs(csv: &Path) -> Vec<PathBuf> {
    Manifest::read(&Manifest::sidecar_path(csv)).unwrap().outputs
}

#[test]
fn criterion_11_determinism_from_manifests() {
    let _g = serial();
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let matrix_file = dir.path().join("appendix.csv");
    std::fs::write(&matrix_file, "0.3,0.3\n0.1,0.3\n").unwrap();
    let mf = matrix_file.to_str().unwrap().to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["sinkhorn", "--matrix", &mf, "--rows", "1,1", "--cols", "1,1"],
        vec!["episode", "--mode", "scbi", "--fixture", "m3", "--h", "1", "--rounds", "50", "--seed", "1"],
        vec!["episode", "--mode", "bi", "--fixture", "m2", "--learner-fixture", "m3", "--rounds", "30", "--seed", "2"],
        vec!["roc", "--fixture", "m2p"],
        vec!["roc-compare", "--shape", "3x2,4x4", "--samples", "5000", "--seed", "7"],
        vec!["short-run", "--rows", "4", "--cols", "3", "--matrices", "3", "--exact-rounds", "3", "--mc-rounds", "6", "--mc-episodes", "200", "--seed", "2"],
        vec!["exact-tree", "--fixture", "m1", "--rounds", "4", "--prior", "theta2"],
        vec!["stability-prior", "--fixture", "m3", "--prior", "theta1", "--radii", "0.02,0.04", "--episodes", "100", "--seed", "3"],
        vec!["stability-prior", "--fixture", "m3", "--scheme", "uniform", "--points", "4", "--episodes", "50", "--seed", "3"],
        vec!["stability-matrix", "--fixture", "m1", "--scheme", "interpolation", "--points", "5", "--episodes", "100", "--seed", "4"],
        vec!["stability-matrix", "--fixture", "m2", "--scheme", "disc", "--layers", "1", "--role", "irrelevant", "--episodes", "50", "--seed", "4"],
        vec!["gridworld"],
        vec!["gridworld", "--experiment", "mismatch", "--gamma", "0.8", "--episodes", "2000", "--offset", "-0.1", "--seed", "5"],
        vec!["fixtures"],
        vec!["fixtures", "--name", "m1p"],
    ];
    let mut failures = Vec::new();
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("a{i}.csv"));
        let b = dir.path().join(format!("b{i}.csv"));
        let c = dir.path().join(format!("c{i}.csv"));
        let mut first = args.clone();
        first.extend(["--threads", "1", "--out", a.to_str().unwrap()]);
        let out = scbi(&first);
        if !out.status.success() {
            failures.push(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
            continue;
        }
        let manifest = Manifest::sidecar_path(&a);
        let out = scbi(&["--from-manifest", manifest.to_str().unwrap(), "--threads", "4", "--out", b.to_str().unwrap()]);
        let mut direct = args.clone();
        direct.extend(["--threads", "3", "--out", c.to_str().unwrap()]);
        let out2 = scbi(&direct);
        if !out.status.success() || !out2.status.success() {
            failures.push(format!("{} rerun failed", args[0]));
            continue;
        }
        for other in [&b, &c] {
            let (xs, ys) = (outputs(&a), outputs(other));
            if xs.len() != ys.len() {
                failures.push(format!("{}: output counts differ", args[0]));
            }
            for (x, y) in xs.iter().zip(&ys) {
                files += 1;
                if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                    failures.push(format!("{}: {} differs from {}", args[0], x.display(), y.display()));
                }
            }
        }
    }
    let detail = format!(
        "{} runs, {files} file comparisons across --threads 1/3/4 and manifest reruns; {}",
        runs.len(),
        if failures.is_empty() { "all byte-identical".to_string() } else { failures.join("; ") }
    );
    report(11, "determinism", failures.is_empty(), &detail, t0.elapsed(), secs(600));
}

#[test]
fn column_normalization_is_idempotent_on_fixtures() {
    // guards the fixture loader that every criterion above depends on
    for name in fixtures::MATRIX_NAMES {
        let m = fixtures::matrix(name).unwrap();
        let again = normalize_columns(&m, &vec![1.0; m.cols()]).unwrap();
        assert!(max_abs(m.as_slice(), again.as_slice()) < 1e-15);
    }
}
