//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiffode::integrate::{
    decouple_linear_system, integrate_adaptive, integrate_fixed, integrate_fixed_with,
    problem_library, ProblemParams, StartMode,
};
use stiffode::linalg::{lu_solve, polynomial_roots};
use stiffode::methods::{adams_moulton_coefficients, bdf_coefficients};
use stiffode::stability::{
    boundary_locus, characteristic_polynomial, find_self_intersections, is_stiffly_stable,
    stiff_stability_abscissa,
};
use stiffode::{
    ComplexNumber, DenseMatrix, Family, OdeProblem, ParamValue, Rational, Scheme, SolverConfig,
    TraceStatus,
};

type Outcome = Result<String, String>;

fn dahlquist(lambda: f64) -> OdeProblem {
    let mut p = BTreeMap::new();
    p.insert("lambda".to_string(), ParamValue::Scalar(lambda));
    problem_library("dahlquist", &p).expect("library problem")
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    match (out, limit) {
        (Ok(msg), Some(limit)) if elapsed >= limit => Err(format!(
            "{msg}; took {:.2}s, limit {:.0}s",
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        )),
        (Ok(msg), _) => Ok(format!("{msg} [{:.2}s]", elapsed.as_secs_f64())),
        (Err(msg), _) => Err(msg),
    }
}

fn criterion_1() -> Outcome {
    let expected = [(3, -0.1), (4, -0.7), (5, -2.4), (6, -6.1)];
    let mut notes = Vec::new();
    let mut failed = false;
    for order in 1..=2 {
        let d = stiff_stability_abscissa(&bdf_coefficients(order).unwrap())
            .map_err(|e| e.to_string())?;
        notes.push(format!("BDF{order} {d:.4}"));
        failed |= d.abs() > 1e-6;
    }
    for (order, reference) in expected {
        let d = stiff_stability_abscissa(&bdf_coefficients(order).unwrap())
            .map_err(|e| e.to_string())?;
        let ok = (d - reference).abs() <= 0.05;
        notes.push(format!(
            "BDF{order} {d:.4} (ref {reference}{})",
            if ok { "" } else { ", off" }
        ));
        failed |= !ok;
    }
    let msg = notes.join(", ");
    if failed {
        Err(msg)
    } else {
        Ok(msg)
    }
}

fn criterion_2() -> Outcome {
    let m = bdf_coefficients(7).unwrap();
    let locus = boundary_locus(&m, 8192).map_err(|e| e.to_string())?;
    let hits = find_self_intersections(&locus);
    let near_origin = hits.iter().any(|z| z.norm() < 0.5);
    let near_minus_8 = hits
        .iter()
        .any(|z| (-9.0..=-7.0).contains(&z.re) && z.im.abs() < 1.0);
    let report = is_stiffly_stable(&m).map_err(|e| e.to_string())?;
    let listed: Vec<String> = hits
        .iter()
        .map(|z| format!("{:.3}{:+.3}i", z.re, z.im))
        .collect();
    let msg = format!(
        "{} intersections [{}], stiffly_stable = {}",
        hits.len(),
        listed.join(", "),
        report.stiffly_stable
    );
    if hits.len() >= 2 && near_origin && near_minus_8 && !report.stiffly_stable {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut counts = Vec::new();
    for order in 1..=6 {
        let locus =
            boundary_locus(&bdf_coefficients(order).unwrap(), 8192).map_err(|e| e.to_string())?;
        counts.push(find_self_intersections(&locus).len());
    }
    let msg = format!("intersection counts for BDF1..6: {counts:?}");
    if counts.iter().all(|&c| c == 0) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let locus = boundary_locus(&bdf_coefficients(1).unwrap(), 4096).map_err(|e| e.to_string())?;
    let worst = locus
        .samples()
        .iter()
        .map(|s| ((s.sigma - 1.0).norm() - 1.0).abs())
        .fold(0.0f64, f64::max);
    let msg = format!("max ||σ-1|-1| = {worst:.2e}");
    if worst < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for order in 1..=6 {
        let m = bdf_coefficients(order).unwrap();
        let locus = boundary_locus(&m, 64).map_err(|e| e.to_string())?;
        for s in locus.samples() {
            let roots = polynomial_roots(&characteristic_polynomial(&m, s.sigma))
                .map_err(|e| e.to_string())?;
            let target = ComplexNumber::from_polar(1.0, s.theta);
            let d = roots
                .iter()
                .map(|z| (z - target).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    let msg = format!("largest distance from e^iθ to nearest root: {worst:.2e}");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn final_error(scheme: Scheme, order: usize, h: f64) -> Result<f64, String> {
    let p = dahlquist(-2.0);
    let t = match scheme {
        Scheme::Rk4 | Scheme::ExplicitEuler => integrate_fixed(&p, scheme, order, h),
        _ => integrate_fixed_with(
            &p,
            scheme,
            order,
            h,
            &SolverConfig::tight(),
            StartMode::Exact,
        ),
    }
    .map_err(|e| e.to_string())?;
    t.final_error(&p)
        .ok_or_else(|| "no exact solution".to_string())
}

fn criterion_6() -> Outcome {
    let cases = [
        ("BDF1", Scheme::Bdf, 1, 1.0, 0.02),
        ("BDF2", Scheme::Bdf, 2, 2.0, 0.02),
        ("BDF3", Scheme::Bdf, 3, 3.0, 0.02),
        ("BDF4", Scheme::Bdf, 4, 4.0, 0.02),
        ("RK4", Scheme::Rk4, 4, 4.0, 0.05),
        ("trapezoidal", Scheme::AdamsMoulton, 2, 2.0, 0.02),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, scheme, order, nominal, h) in cases {
        let e1 = final_error(scheme, order, h)?;
        let e2 = final_error(scheme, order, h / 2.0)?;
        let p = (e1 / e2).log2();
        ok &= (p - nominal).abs() <= 0.25;
        notes.push(format!("{name} {p:.3}"));
    }
    let msg = notes.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let p = dahlquist(-1e6)
        .with_interval(0.0, 2.0)
        .map_err(|e| e.to_string())?;
    let euler = integrate_fixed(&p, Scheme::ExplicitEuler, 1, 0.1).map_err(|e| e.to_string())?;
    let blow_up = euler.ys.iter().take(21).position(|y| y[0].abs() > 1e10);
    let bdf = integrate_fixed(&p, Scheme::Bdf, 1, 0.1).map_err(|e| e.to_string())?;
    let monotone = bdf.ys.windows(2).all(|w| w[1][0].abs() < w[0][0].abs());
    let msg = format!(
        "Euler exceeds 1e10 at step {}, BDF1 strictly decreasing over {} steps: {monotone}",
        blow_up.map_or("never".into(), |s| s.to_string()),
        bdf.steps()
    );
    if blow_up.is_some() && monotone {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let mild = dahlquist(-1.0);
    let t = integrate_adaptive(&mild, &SolverConfig::with_tolerances(1e-6, 1e-6))
        .map_err(|e| e.to_string())?;
    let err = t.final_error(&mild).unwrap_or(f64::INFINITY);
    let stiff = dahlquist(-1e6);
    let s = integrate_adaptive(&stiff, &SolverConfig::with_tolerances(1e-4, 1e-4))
        .map_err(|e| e.to_string())?;
    let msg = format!(
        "dahlquist(-1) error {err:.2e} ({:?}); dahlquist(-1e6) {} steps ({:?})",
        t.status,
        s.steps(),
        s.status
    );
    if t.status == TraceStatus::Completed
        && err <= 1e-4
        && s.status == TraceStatus::Completed
        && s.steps() < 10_000
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn inverse(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(lu_solve(a, &e).ok()?);
    }
    DenseMatrix::new(n, n, (0..n * n).map(|k| cols[k % n][k / n]).collect()).ok()
}

/// `V diag(λ) V⁻¹` with distinct `λ ∈ [-10, -0.1]` and moderately conditioned `V`.
fn random_system(rng: &mut ChaCha8Rng) -> DenseMatrix {
    loop {
        let lambdas: Vec<f64> = (0..3).map(|_| -rng.gen_range(0.1..10.0)).collect();
        let mut sorted = lambdas.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < 0.05) {
            continue;
        }
        let v = DenseMatrix::new(3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let Some(vinv) = inverse(&v) else { continue };
        if v.norm_inf() * vinv.norm_inf() > 1e3 {
            continue;
        }
        return v.mul(&DenseMatrix::diag(&lambdas)).mul(&vinv);
    }
}

/// Differences are measured relative to `max(1, ‖y_exact(x_end)‖∞)`, the
/// scale a relative tolerance refers to.
fn criterion_9() -> Outcome {
    let rtol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_901);
    let mut worst_scaled = 0.0f64;
    let mut worst_abs = 0.0f64;
    for _ in 0..20 {
        let a = random_system(&mut rng);
        let y0: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let decoupled = decouple_linear_system(&a, &y0, 0.0, 1.0).map_err(|e| e.to_string())?;
        let mut params: ProblemParams = BTreeMap::new();
        params.insert("matrix".into(), ParamValue::Matrix(a));
        params.insert("y0".into(), ParamValue::Vector(y0));
        let p = problem_library("linear_system", &params).map_err(|e| e.to_string())?;
        let t = integrate_adaptive(&p, &SolverConfig::with_tolerances(rtol, rtol))
            .map_err(|e| e.to_string())?;
        if t.status != TraceStatus::Completed {
            return Err(format!("adaptive run ended with {:?}", t.status));
        }
        let exact = decoupled.exact(1.0);
        let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diff = t
            .last_y()
            .iter()
            .zip(&exact)
            .map(|(y, e)| (y - e).abs())
            .fold(0.0f64, f64::max);
        worst_abs = worst_abs.max(diff);
        worst_scaled = worst_scaled.max(diff / scale);
    }
    let msg = format!(
        "largest scaled difference {:.2}·rtol (bound 10·rtol), largest absolute {worst_abs:.2e}",
        worst_scaled / rtol
    );
    if worst_scaled <= 10.0 * rtol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_10() -> Outcome {
    for order in 1..=7 {
        let m = bdf_coefficients(order).map_err(|e| e.to_string())?;
        let (rho, s) = m.rho_sigma();
        let one = Rational::from_integer(1);
        if rho.eval(one) != Rational::from_integer(0) || rho.derivative().eval(one) != s.eval(one) {
            return Err(format!("BDF{order} is not consistent"));
        }
        for j in 0..=order {
            if m.monomial_residual(j) != Rational::from_integer(0) {
                return Err(format!("BDF{order} is not exact for x^{j}"));
            }
        }
    }
    let euler = adams_moulton_coefficients(0).map_err(|e| e.to_string())?;
    let trap = adams_moulton_coefficients(1).map_err(|e| e.to_string())?;
    let r = |n, d| Rational::new(n, d);
    let euler_ok = euler.family() == Family::AdamsMoulton
        && euler.alphas() == [r(1, 1)]
        && euler.betas() == [r(1, 1)];
    let trap_ok = trap.alphas() == [r(1, 1)] && trap.betas() == [r(1, 2), r(1, 2)];
    let bdf1 = bdf_coefficients(1).unwrap();
    let same_as_bdf1 = bdf1.alphas() == euler.alphas() && bdf1.betas()[0] == euler.betas()[0];
    let msg = "BDF1..7 rational-exact consistency and exactness; AM q=0 is implicit Euler, q=1 is trapezoidal".to_string();
    if euler_ok && trap_ok && same_as_bdf1 {
        Ok(msg)
    } else {
        Err(format!(
            "special cases differ: euler {euler_ok}, trapezoid {trap_ok}, bdf1 {same_as_bdf1}"
        ))
    }
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("run{run}.csv"));
        let args = [
            "stiffode",
            "region",
            "--family",
            "bdf",
            "--order",
            "6",
            "--samples",
            "4096",
            "--format",
            "csv",
            "--out",
        ];
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = stiffode_cli::run(
            args.iter()
                .map(OsString::from)
                .chain([path.clone().into_os_string()]),
            &mut out,
            &mut err,
        );
        if code != 0 {
            return Err(format!(
                "run {run} exited with {code}: {}",
                String::from_utf8_lossy(&err)
            ));
        }
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let msg = format!("two runs, {} bytes each", outputs[0].len());
    if outputs[0] == outputs[1] && !outputs[0].is_empty() {
        Ok(msg)
    } else {
        Err(format!(
            "outputs differ ({} vs {} bytes)",
            outputs[0].len(),
            outputs[1].len()
        ))
    }
}

fn main() -> ExitCode {
    let five = Some(Duration::from_secs(5));
    let ten = Some(Duration::from_secs(10));
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        (
            "stiff-stability abscissa table",
            Box::new(move || timed(five, criterion_1)),
        ),
        (
            "BDF7 self-intersections, not stiffly stable",
            Box::new(move || timed(five, criterion_2)),
        ),
        (
            "BDF1..6 loci are simple closed curves",
            Box::new(|| timed(None, criterion_3)),
        ),
        (
            "BDF1 locus is the unit circle about 1",
            Box::new(|| timed(None, criterion_4)),
        ),
        (
            "locus points give unit roots of P(z)",
            Box::new(|| timed(None, criterion_5)),
        ),
        (
            "empirical convergence orders",
            Box::new(move || timed(ten, criterion_6)),
        ),
        (
            "explicit Euler vs BDF1 on a stiff problem",
            Box::new(|| timed(None, criterion_7)),
        ),
        (
            "adaptive BDF accuracy and stiff step count",
            Box::new(|| timed(None, criterion_8)),
        ),
        (
            "decoupled exact vs adaptive on random systems",
            Box::new(|| timed(None, criterion_9)),
        ),
        (
            "coefficient oracles",
            Box::new(|| timed(None, criterion_10)),
        ),
        (
            "CLI region CSV determinism",
            Box::new(|| timed(None, criterion_11)),
        ),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
