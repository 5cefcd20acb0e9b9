//! Implicit multistep corrector.
//!
//! One step of the normalised method solves
//! `G(y) = y - h·β_0·F(x[n+1], y) - ψ = 0`, where `ψ` collects the known
//! history terms, by damped Newton iteration on `I - h·β_0·J`.

use super::{norm_inf, IntegrateError, OdeProblem, SolverConfig};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::methods::{LinearMultistepMethod, Rational};

pub(crate) struct CorrectorOutcome {
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub iters: usize,
    /// Largest observed contraction ratio `‖Δ_k‖ / ‖Δ_{k-1}‖`.
    pub rate: f64,
}

/// LU factors of `I - hβ_0·J`.
pub(crate) fn iteration_matrix(
    jac: &DenseMatrix,
    hb0: f64,
) -> Result<LuFactors<f64>, IntegrateError> {
    let n = jac.rows();
    let mut m = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] -= hb0 * jac[(i, j)];
        }
    }
    Ok(LuFactors::new(&m)?)
}

/// Value at the next grid point of the polynomial through `history`
/// (newest first, uniform spacing).
pub(crate) fn extrapolate(history: &[&[f64]]) -> Vec<f64> {
    let k = history.len();
    let n = history[0].len();
    let mut out = vec![0.0; n];
    let mut binom = 1.0;
    for (i, y) in history.iter().enumerate() {
        // C(k, i+1)
        binom = binom * (k - i) as f64 / (i + 1) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        for (o, v) in out.iter_mut().zip(y.iter()) {
            *o += sign * binom * v;
        }
    }
    out
}

fn residual(y: &[f64], f: &[f64], hb0: f64, psi: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(f)
        .zip(psi)
        .map(|((yi, fi), pi)| yi - hb0 * fi - pi)
        .collect()
}

/// Damped Newton on the corrector equation using a prefactored iteration
/// matrix. A full step is halved (at most three times) when it more than
/// doubles the residual.
pub(crate) fn solve_corrector(
    problem: &OdeProblem,
    config: &SolverConfig,
    x1: f64,
    hb0: f64,
    psi: &[f64],
    y_pred: Vec<f64>,
    lu: &LuFactors<f64>,
) -> Result<CorrectorOutcome, IntegrateError> {
    let failure = |iterations: usize, last: Vec<f64>| IntegrateError::NewtonFailure {
        x: x1,
        iterations,
        last,
    };
    let mut y = y_pred;
    let mut f = match problem.eval_rhs(x1, &y) {
        Ok(f) => f,
        Err(IntegrateError::NonFinite { .. }) => return Err(failure(0, y)),
        Err(e) => return Err(e),
    };
    let mut g = residual(&y, &f, hb0, psi);
    let mut prev_step: Option<f64> = None;
    let mut rate: f64 = 0.0;

    for it in 1..=config.newton_max_iters {
        let g_norm = norm_inf(&g);
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = lu.solve(&neg_g)?;
        let tol = config.newton_tol * (config.atol + config.rtol * norm_inf(&y));

        let mut lambda = 1.0;
        let (cand, fc, gc) = loop {
            let cand: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let evaluated = match problem.eval_rhs(x1, &cand) {
                Ok(fc) => Some(fc),
                Err(IntegrateError::NonFinite { .. }) => None,
                Err(e) => return Err(e),
            };
            match evaluated {
                Some(fc) => {
                    let gc = residual(&cand, &fc, hb0, psi);
                    if lambda <= 0.125 || g_norm <= tol || norm_inf(&gc) <= 2.0 * g_norm {
                        break (cand, fc, gc);
                    }
                }
                None if lambda <= 0.125 => return Err(failure(it, y)),
                None => {}
            }
            lambda *= 0.5;
        };
        let step = lambda * norm_inf(&delta);
        y = cand;
        f = fc;
        g = gc;
        if let Some(prev) = prev_step.filter(|p| *p > 0.0) {
            rate = rate.max(step / prev);
        }
        prev_step = Some(step);
        let tol = config.newton_tol * (config.atol + config.rtol * norm_inf(&y));
        if step <= tol {
            return Ok(CorrectorOutcome {
                y,
                f,
                iters: it,
                rate,
            });
        }
        if it >= 2 && rate > 0.9 {
            break;
        }
    }
    Err(failure(config.newton_max_iters, y))
}

fn check_history(
    method: &LinearMultistepMethod,
    dim: usize,
    history_x: &[f64],
    history_y: &[Vec<f64>],
    history_f: &[Vec<f64>],
    h: f64,
) -> Result<(), IntegrateError> {
    let k = method.steps();
    let need_f = method
        .betas()
        .iter()
        .rposition(|b| *b != Rational::from_integer(0))
        .unwrap_or(0);
    if history_y.len() != k || history_x.len() != k {
        return Err(IntegrateError::InvalidHistory(format!(
            "method needs {k} past values, got {} abscissae and {} states",
            history_x.len(),
            history_y.len()
        )));
    }
    if history_f.len() < need_f {
        return Err(IntegrateError::InvalidHistory(format!(
            "method needs {need_f} past derivatives, got {}",
            history_f.len()
        )));
    }
    if history_y
        .iter()
        .chain(&history_f[..need_f])
        .any(|v| v.len() != dim)
    {
        return Err(IntegrateError::InvalidHistory(format!(
            "history vectors must have length {dim}"
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrateError::InvalidConfig(format!(
            "step size must be positive, got {h}"
        )));
    }
    for w in history_x.windows(2) {
        if ((w[0] - w[1]) - h).abs() > 1e-8 * h {
            return Err(IntegrateError::InvalidHistory(format!(
                "history spacing {} does not match step {h}",
                w[0] - w[1]
            )));
        }
    }
    Ok(())
}

/// `ψ = Σ α_i y[n+1-i] + h Σ_{j≥1} β_j f[n+1-j]`.
pub(crate) fn history_term(
    alphas: &[f64],
    betas: &[f64],
    history_y: &[&[f64]],
    history_f: &[&[f64]],
    h: f64,
) -> Vec<f64> {
    let n = history_y[0].len();
    let mut psi = vec![0.0; n];
    for (a, y) in alphas.iter().zip(history_y) {
        for (p, v) in psi.iter_mut().zip(y.iter()) {
            *p += a * v;
        }
    }
    for (b, f) in betas.iter().skip(1).zip(history_f) {
        for (p, v) in psi.iter_mut().zip(f.iter()) {
            *p += h * b * v;
        }
    }
    psi
}

/// One step of an implicit linear multistep method.
///
/// `history_x`, `history_y` hold exactly `method.steps()` entries, newest
/// first, on a uniform grid of spacing `h`; `history_f` holds at least the
/// derivatives the method's `β_1..β_q` read (none for BDF). The predictor is
/// the polynomial extrapolation of `history_y`. Returns the new state and the
/// number of Newton iterations.
pub fn step_lmm_implicit(
    method: &LinearMultistepMethod,
    problem: &OdeProblem,
    history_x: &[f64],
    history_y: &[Vec<f64>],
    history_f: &[Vec<f64>],
    h: f64,
    config: &SolverConfig,
) -> Result<(Vec<f64>, usize), IntegrateError> {
    check_history(
        method,
        problem.dimension(),
        history_x,
        history_y,
        history_f,
        h,
    )?;
    let ys: Vec<&[f64]> = history_y.iter().map(Vec::as_slice).collect();
    let fs: Vec<&[f64]> = history_f.iter().map(Vec::as_slice).collect();
    let betas = method.betas_f64();
    let psi = history_term(&method.alphas_f64(), &betas, &ys, &fs, h);
    let x1 = history_x[0] + h;
    let y_pred = extrapolate(&ys);
    let hb0 = h * betas[0];
    let f_pred = match problem.eval_rhs(x1, &y_pred) {
        Ok(f) => f,
        Err(IntegrateError::NonFinite { .. }) => problem.eval_rhs(history_x[0], &ys[0])?,
        Err(e) => return Err(e),
    };
    let jac = problem.jacobian_at(x1, &y_pred, &f_pred)?;
    let lu = iteration_matrix(&jac, hb0)?;
    match solve_corrector(problem, config, x1, hb0, &psi, y_pred, &lu) {
        Ok(out) => Ok((out.y, out.iters)),
        // one retry with the Jacobian refreshed at the last iterate
        Err(IntegrateError::NewtonFailure {
            iterations, last, ..
        }) if last.iter().all(|v| v.is_finite()) => {
            let f_last = problem.eval_rhs(x1, &last)?;
            let jac = problem.jacobian_at(x1, &last, &f_last)?;
            let lu = iteration_matrix(&jac, hb0)?;
            let out = solve_corrector(problem, config, x1, hb0, &psi, last, &lu)?;
            Ok((out.y, iterations + out.iters))
        }
        Err(e) => Err(e),
    }
}
