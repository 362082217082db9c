//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//!     cargo test -p epkit --test acceptance

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use epkit::eigen::{eigenvalues, mixing_coefficients};
use epkit::ep::{encircle, find_branch_point};
use epkit::sweep::{detect_avoided_crossings, overlap_onset, sweep, DEFAULT_MIXING_THRESHOLD};
use epkit::{
    biorthogonality_metrics, coalescence_residual, eigendecompose, eigensystem_at, ComplexMatrix, Complex64,
    EigenOptions, FamilySpec, LevelSpec, Strategy as Solver,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

// criterion 1
const CROSSING_B2_TOL: f64 = 1e-8;
// criterion 2
const BP_LOCATION_TOL: f64 = 1e-8;
const BP_VALUE_TOL: f64 = 1e-8;
const BP_STEP_TOL: f64 = 1e-14;
// criterion 3
const LOOP_RADIUS: f64 = 0.02;
const LOOP_STEPS: usize = 256;
const LOOP_OFFSET: f64 = 0.25;
const LOOP_REPEATS: usize = 5;
// criterion 4
const COALESCENCE_BOUND: f64 = 1e-2;
const NORM_BOUND: f64 = 10.0;
// criterion 5
const ONSET_RANGE: (f64, f64) = (0.015, 0.025);
// criterion 6
const CASES_PER_SIZE: u32 = 2500;
const TRACE_TOL: f64 = 1e-10;
const CHARPOLY_TOL: f64 = 1e-8;
const C_ORTHO_TOL: f64 = 1e-8;
const NORM_FLOOR_TOL: f64 = 1e-10;
const CLOSED_FORM_TOL: f64 = 1e-10;
const ROW_SUM_TOL: f64 = 1e-8;
// criterion 7
const VARIATION_RATIO: f64 = 0.5;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn two_level(v: f64) -> FamilySpec {
    FamilySpec::uniform(vec![LevelSpec::bound(1.0, -0.5), LevelSpec::bound(0.0, 1.0)], v).unwrap()
}

fn four_level(v: f64) -> FamilySpec {
    FamilySpec::uniform(
        vec![
            LevelSpec::bound(1.0, -1.0 / 3.0),
            LevelSpec::bound(1.0, -5.0 / 12.0),
            LevelSpec::bound(1.0, -0.5),
            LevelSpec::bound(0.0, 1.0),
        ],
        v,
    )
    .unwrap()
}

fn critical_values() -> Outcome {
    let mut detail = Vec::new();
    for v in [0.05, 0.5, 1.0] {
        let records = sweep(&two_level(v), 0.0, 4.0 / 3.0, 400, true).map_err(|e| e.to_string())?;
        let events = detect_avoided_crossings(&records);
        ensure(events.len() == 1, || format!("v = {v}: {} events", events.len()))?;
        let e = &events[0];
        ensure(e.exchanged, || format!("v = {v}: states do not exchange"))?;
        let k = e.record_index;
        let cell = (records[k + 1].a - records[k - 1].a) / 2.0;
        ensure((e.a_min - 2.0 / 3.0).abs() <= cell, || {
            format!("v = {v}: a_min = {} is more than one cell ({cell:e}) from 2/3", e.a_min)
        })?;
        let at = records
            .iter()
            .find(|r| r.a == 2.0 / 3.0)
            .ok_or_else(|| format!("v = {v}: no record at a = 2/3"))?;
        let (b11, b12) = (at.b_sq[0][0], at.b_sq[0][1]);
        ensure(
            (b11 - 0.5).norm() <= CROSSING_B2_TOL && (b12 - 0.5).norm() <= CROSSING_B2_TOL,
            || format!("v = {v}: b2_11 = {b11}, b2_12 = {b12}"),
        )?;
        detail.push(format!("v={v}: a_min={:.6} b2_11={:.10}", e.a_min, b11.re));
    }
    Ok(detail.join("; "))
}

fn branch_point_location() -> Outcome {
    let mut detail = Vec::new();
    for v in [0.05, 0.5, 1.0] {
        let bp = find_branch_point(&two_level(v), c(2.0 / 3.0, 0.1), BP_STEP_TOL).map_err(|e| e.to_string())?;
        let expected = c(2.0 / 3.0, 4.0 / 3.0 * v);
        let da = (bp.a_bp - expected).norm();
        let de = (bp.value_bp - (0.5 + bp.a_bp / 4.0)).norm();
        ensure(da < BP_LOCATION_TOL, || format!("v = {v}: a_bp = {} off by {da:e}", bp.a_bp))?;
        ensure(de < BP_VALUE_TOL, || format!("v = {v}: value = {} off by {de:e}", bp.value_bp))?;
        detail.push(format!("v={v}: |da|={da:.1e} |dE|={de:.1e}"));
    }
    Ok(detail.join("; "))
}

fn monodromy() -> Outcome {
    let spec = two_level(0.05);
    let bp = find_branch_point(&spec, c(2.0 / 3.0, 0.1), BP_STEP_TOL).map_err(|e| e.to_string())?;
    let run = || -> Result<_, String> {
        let around = encircle(&spec, bp.a_bp, LOOP_RADIUS, LOOP_STEPS).map_err(|e| e.to_string())?;
        let away = encircle(&spec, bp.a_bp + LOOP_OFFSET, LOOP_RADIUS, LOOP_STEPS).map_err(|e| e.to_string())?;
        Ok((around, away))
    };
    let first = run()?;
    ensure(first.0.transposition() == Some((0, 1)), || {
        format!("loop around a_bp gave {:?}", first.0.permutation)
    })?;
    ensure(first.1.is_identity(), || format!("loop away from a_bp gave {:?}", first.1.permutation))?;
    for k in 1..LOOP_REPEATS {
        let again = run()?;
        ensure(again == first, || format!("run {} differs from run 0", k))?;
    }
    Ok(format!(
        "around: {:?}, away: {:?}, identical over {LOOP_REPEATS} runs",
        first.0.permutation, first.1.permutation
    ))
}

fn coalescence_law() -> Outcome {
    let v = 0.05;
    let spec = two_level(v);
    let mut residuals = Vec::new();
    let mut norms = Vec::new();
    for t in [0.9, 0.99, 0.999, 0.9999] {
        let a = c(2.0 / 3.0, t * 4.0 / 3.0 * v);
        let sys = eigensystem_at(&spec, a, &EigenOptions::default()).map_err(|e| e.to_string())?;
        residuals.push(coalescence_residual(&sys.pairs[0], &sys.pairs[1]).map_err(|e| e.to_string())?);
        norms.push(biorthogonality_metrics(&sys).max_norm);
    }
    let detail = format!(
        "residuals {:?}, max_norm {:?}",
        residuals.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>(),
        norms.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()
    );
    ensure(residuals.windows(2).all(|w| w[1] < w[0]), || format!("residual not decreasing: {detail}"))?;
    ensure(norms.windows(2).all(|w| w[1] > w[0]), || format!("max_norm not increasing: {detail}"))?;
    ensure(*norms.last().unwrap() > NORM_BOUND, || format!("max_norm stays below {NORM_BOUND}: {detail}"))?;
    ensure(*residuals.last().unwrap() < COALESCENCE_BOUND, || {
        format!("residual at t = 0.9999 is not below {COALESCENCE_BOUND}: {detail}")
    })?;
    Ok(detail)
}

fn overlap_onset_criterion() -> Outcome {
    let vs: Vec<f64> = (0..15).map(|k| 0.005 + 0.0025 * k as f64).collect();
    let result = overlap_onset(&four_level(0.005), &vs, DEFAULT_MIXING_THRESHOLD).map_err(|e| e.to_string())?;
    let onset = result.onset.ok_or("mixing regions never overlap on the grid")?;
    ensure(onset >= ONSET_RANGE.0 && onset <= ONSET_RANGE.1, || {
        format!("onset {onset} outside {ONSET_RANGE:?}")
    })?;
    Ok(format!("onset v = {onset:.5}"))
}

#[derive(Debug, Clone)]
struct Instance {
    m: DMatrix<Complex64>,
    hermitian: bool,
    /// Orthonormal real basis for the mixing check.
    basis: DMatrix<f64>,
}

fn instance(n: usize) -> impl Strategy<Value = Instance> {
    (
        any::<bool>(),
        prop::collection::vec(-2.0..2.0f64, n),
        prop::collection::vec(0.0..1.0f64, n),
        prop::collection::vec((-1.0..1.0f64, -0.3..0.3f64), n * n),
        prop::collection::vec(-1.0..1.0f64, n * n),
    )
        .prop_map(move |(hermitian, e, width, v, q)| {
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    let c = if hermitian { 0.0 } else { width[i] };
                    Complex64::new(e[i], -0.5 * c)
                } else {
                    let (lo, hi) = (i.min(j), i.max(j));
                    let (re, im) = v[lo * n + hi];
                    Complex64::new(re, if hermitian { 0.0 } else { im })
                }
            });
            let s = DMatrix::from_fn(n, n, |i, j| q[i.min(j) * n + i.max(j)]);
            let basis = s.symmetric_eigen().eigenvectors;
            Instance { m, hermitian, basis }
        })
}

#[derive(Debug, Default)]
struct Worst {
    trace: f64,
    charpoly: f64,
    c_ortho: f64,
    norm_floor: f64,
    closed_form: f64,
    row_sum: f64,
    cases: usize,
}

fn max_row_sum(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_instance(inst: &Instance, worst: &RefCell<Worst>) -> Result<(), TestCaseError> {
    let m = &inst.m;
    let n = m.nrows();
    let norm = max_row_sum(m);
    let cm = ComplexMatrix::new(m.clone()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sys = eigendecompose(&cm).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut w = worst.borrow_mut();
    w.cases += 1;

    let trace = m.trace();
    let sum: Complex64 = sys.pairs.iter().map(|p| p.value).sum();
    let err = (sum - trace).norm() / (1.0 + trace.norm());
    w.trace = w.trace.max(err);
    prop_assert!(err <= TRACE_TOL, "trace identity: {err:e}");

    // independent oracle: LU determinant of M - lambda I
    for p in &sys.pairs {
        let shifted = m - DMatrix::<Complex64>::identity(n, n) * p.value;
        let det = shifted.determinant().norm() / (1.0 + norm).powi(n as i32);
        w.charpoly = w.charpoly.max(det);
        prop_assert!(det <= CHARPOLY_TOL, "characteristic polynomial residual {det:e} at {}", p.value);
    }

    if !sys.is_defective() {
        let gram = sys.c_gram();
        let dev = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (gram[(i, j)] - if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }).norm())
            .fold(0.0, f64::max);
        w.c_ortho = w.c_ortho.max(dev);
        prop_assert!(dev <= C_ORTHO_TOL, "c-orthogonality deviation {dev:e}");

        let metrics = biorthogonality_metrics(&sys);
        for &h in &metrics.norms {
            w.norm_floor = w.norm_floor.max(1.0 - h);
            prop_assert!(h >= 1.0 - NORM_FLOOR_TOL, "Hermitian norm {h} below 1");
        }
    }

    if n == 2 {
        let closed = eigenvalues(&cm, Solver::Auto).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let general = eigenvalues(&cm, Solver::Schur).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for (x, y) in closed.iter().zip(&general) {
            let err = (x - y).norm() / (1.0 + norm);
            w.closed_form = w.closed_form.max(err);
            prop_assert!(err <= CLOSED_FORM_TOL, "closed form {x} vs general {y}");
        }
    }

    if inst.hermitian {
        let mix = mixing_coefficients(&sys, &inst.basis).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for r in 0..n {
            let s: f64 = (0..n).map(|i| mix.b_sq[(r, i)].norm()).sum();
            w.row_sum = w.row_sum.max((s - 1.0).abs());
            prop_assert!((s - 1.0).abs() <= ROW_SUM_TOL, "row {r} of b^2 sums to {s}");
        }
    }
    Ok(())
}

fn property_suites() -> Outcome {
    let worst = RefCell::new(Worst::default());
    for (k, n) in [2usize, 3, 4, 8].into_iter().enumerate() {
        let config = Config {
            cases: CASES_PER_SIZE,
            failure_persistence: None,
            ..Config::default()
        };
        let seed = [k as u8 + 1; 32];
        let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed));
        runner
            .run(&instance(n), |inst| check_instance(&inst, &worst))
            .map_err(|e| format!("n = {n}: {e}"))?;
    }
    let w = worst.into_inner();
    Ok(format!(
        "{} instances; worst: trace {:.1e}, charpoly {:.1e}, c-ortho {:.1e}, 1-norm {:.1e}, closed-form {:.1e}, row-sum {:.1e}",
        w.cases, w.trace, w.charpoly, w.c_ortho, w.norm_floor, w.closed_form, w.row_sum
    ))
}

fn total_variation(v: f64) -> Result<Vec<f64>, String> {
    let records = sweep(&two_level(v), 0.0, 4.0 / 3.0, 400, true).map_err(|e| e.to_string())?;
    let n = records[0].n();
    Ok((0..n)
        .map(|l| records.windows(2).map(|w| (w[1].values[l].re - w[0].values[l].re).abs()).sum())
        .collect())
}

fn weak_dependence() -> Outcome {
    let strong = total_variation(1.0)?;
    let weak = total_variation(0.05)?;
    for (l, (s, w)) in strong.iter().zip(&weak).enumerate() {
        ensure(*s < VARIATION_RATIO * w, || {
            format!("state {}: variation {s:.4} at v = 1 vs {w:.4} at v = 0.05", l + 1)
        })?;
    }
    Ok(format!("variation v=1: {strong:.4?}, v=0.05: {weak:.4?}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = dir.path().join("first");
    let args = |out: &std::path::Path| {
        vec![
            "sweep".to_string(),
            "--config".into(),
            "four_level_v003".into(),
            "--from".into(),
            "0.6".into(),
            "--to".into(),
            "0.8".into(),
            "--steps".into(),
            "500".into(),
            "--adaptive".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    epkit::cli::run(args(&first)).map_err(|e| e.to_string())?;
    let csv = read(&first.join("sweep.csv"))?;
    let crossings = read(&first.join("crossings.csv"))?;

    epkit::cli::run(args(&first)).map_err(|e| e.to_string())?;
    ensure(read(&first.join("sweep.csv"))? == csv, || "rerun changed sweep.csv".into())?;
    ensure(read(&first.join("crossings.csv"))? == crossings, || "rerun changed crossings.csv".into())?;

    let replayed = dir.path().join("replayed");
    let manifest = first.join("manifest.toml");
    epkit::cli::run([
        "replay".to_string(),
        "--manifest".into(),
        manifest.display().to_string(),
        "--out".into(),
        replayed.display().to_string(),
    ])
    .map_err(|e| e.to_string())?;
    ensure(read(&replayed.join("sweep.csv"))? == csv, || "replay changed sweep.csv".into())?;
    ensure(read(&replayed.join("crossings.csv"))? == crossings, || "replay changed crossings.csv".into())?;
    Ok(format!("{} bytes identical across rerun and manifest replay", csv.len()))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panic".into())
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "critical-value reproduction", critical_values),
        (2, "branch-point location", branch_point_location),
        (3, "monodromy certification", monodromy),
        (4, "coalescence law", coalescence_law),
        (5, "overlap onset", overlap_onset_criterion),
        (6, "property suites", property_suites),
        (7, "weak eigenvalue dependence", weak_dependence),
        (8, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| Err(panic_message(p)));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}, {secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}, {secs:.2}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
