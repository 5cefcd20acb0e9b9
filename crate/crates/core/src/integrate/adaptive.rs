//! Variable-order, variable-step BDF driver.
//!
//! The history is always kept on a uniform grid so the fixed-coefficient
//! formulas apply; a step-size change re-samples it by polynomial
//! interpolation. Local error is the Milne-type estimate
//! `E/(P + E)·(y_corrector - y_predictor)`, where `E` is the corrector's error
//! constant and `P` the predictor's (1 for extrapolation through `q + 1`
//! points, 1/2 for the Euler predictor on the very first step).

use super::implicit::{extrapolate, history_term, iteration_matrix, solve_corrector};
use super::{IntegrateError, IntegrationTrace, OdeProblem, SolverConfig, TraceStatus};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::methods::{bdf_coefficients, to_f64};

const SAFETY: f64 = 0.9;
const MAX_GROWTH: f64 = 2.0;
const MIN_SHRINK: f64 = 0.1;
/// Step increases smaller than this are not worth re-sampling the history.
const MIN_WORTHWHILE_GROWTH: f64 = 1.2;
const NEWTON_SHRINK: f64 = 0.25;
const MAX_NEWTON_FAILURES_AT_HMIN: usize = 3;
const MAX_JACOBIAN_AGE: usize = 20;
const SLOW_CONVERGENCE: f64 = 0.5;

struct BdfData {
    alphas: Vec<f64>,
    beta0: f64,
    /// Leading coefficient of the corrector's local error, `-C_{q+1}`.
    error_coeff: f64,
}

fn bdf_table(max_order: usize) -> Result<Vec<BdfData>, IntegrateError> {
    (1..=max_order)
        .map(|q| {
            let m = bdf_coefficients(q)?;
            Ok(BdfData {
                alphas: m.alphas_f64(),
                beta0: to_f64(&m.beta0()),
                error_coeff: -to_f64(&m.error_constant()),
            })
        })
        .collect()
}

/// Uniform-grid history, newest first.
struct History {
    xs: Vec<f64>,
    ys: Vec<Vec<f64>>,
    spacing: f64,
    cap: usize,
}

impl History {
    fn len(&self) -> usize {
        self.xs.len()
    }

    fn push(&mut self, x: f64, y: Vec<f64>, spacing: f64) {
        self.xs.insert(0, x);
        self.ys.insert(0, y);
        self.xs.truncate(self.cap);
        self.ys.truncate(self.cap);
        self.spacing = spacing;
    }

    fn y_refs(&self, count: usize) -> Vec<&[f64]> {
        self.ys[..count].iter().map(Vec::as_slice).collect()
    }

    /// Re-samples onto `x[0] - j·h` by piecewise Lagrange interpolation of
    /// degree `order + 1`, each target using the stored points nearest to it.
    /// Keeps every target inside the stored range, and at least `order + 1`.
    fn regrid(&mut self, h: f64, order: usize) {
        if self.len() == 1 || h == self.spacing {
            self.spacing = h;
            return;
        }
        let n = self.len();
        let fit = n.min(order + 2);
        let x0 = self.xs[0];
        let oldest = self.xs[n - 1];
        let covered = ((x0 - oldest) / h * (1.0 + 1e-12)).floor() as usize + 1;
        let keep = covered.max(order + 1).min(self.cap);
        let dim = self.ys[0].len();
        let mut xs = Vec::with_capacity(keep);
        let mut ys = Vec::with_capacity(keep);
        xs.push(x0);
        ys.push(self.ys[0].clone());
        for j in 1..keep {
            let t = x0 - j as f64 * h;
            let nearest = ((x0 - t) / self.spacing).round() as usize;
            let start = nearest.saturating_sub(fit / 2).min(n - fit);
            let window = start..start + fit;
            let mut y = vec![0.0; dim];
            for i in window.clone() {
                let mut w = 1.0;
                for l in window.clone() {
                    if l != i {
                        w *= (t - self.xs[l]) / (self.xs[i] - self.xs[l]);
                    }
                }
                for (acc, v) in y.iter_mut().zip(&self.ys[i]) {
                    *acc += w * v;
                }
            }
            xs.push(t);
            ys.push(y);
        }
        self.xs = xs;
        self.ys = ys;
        self.spacing = h;
    }

    /// `‖∇^m y‖` at the newest point, weighted RMS.
    fn backward_difference_norm(&self, m: usize, weights: &[f64]) -> f64 {
        let dim = weights.len();
        let mut diff = vec![0.0; dim];
        let mut binom = 1.0;
        for i in 0..=m {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            for (d, v) in diff.iter_mut().zip(&self.ys[i]) {
                *d += sign * binom * v;
            }
            binom = binom * (m - i) as f64 / (i + 1) as f64;
        }
        weighted_rms(&diff, weights)
    }
}

fn weighted_rms(v: &[f64], weights: &[f64]) -> f64 {
    let sum: f64 = v.iter().zip(weights).map(|(a, w)| (a / w).powi(2)).sum();
    (sum / v.len() as f64).sqrt()
}

/// Unclamped step factor an error norm permits for a method of order `p`.
fn raw_step_factor(err: f64, p: usize) -> f64 {
    if err <= 0.0 {
        return f64::INFINITY;
    }
    SAFETY * err.powf(-1.0 / (p as f64 + 1.0))
}

fn step_factor(err: f64, p: usize) -> f64 {
    raw_step_factor(err, p).clamp(MIN_SHRINK, MAX_GROWTH)
}

struct JacobianCache {
    jac: Option<DenseMatrix>,
    age: usize,
    fresh: bool,
    lu: Option<(LuFactors<f64>, f64)>,
}

impl JacobianCache {
    fn invalidate(&mut self) {
        self.jac = None;
        self.lu = None;
    }

    fn factors(
        &mut self,
        problem: &OdeProblem,
        x: f64,
        y: &[f64],
        hb0: f64,
    ) -> Result<&LuFactors<f64>, IntegrateError> {
        if self.jac.is_none() || self.age > MAX_JACOBIAN_AGE {
            let f = problem.eval_rhs(x, y)?;
            self.jac = Some(problem.jacobian_at(x, y, &f)?);
            self.age = 0;
            self.fresh = true;
            self.lu = None;
        }
        let stale = !matches!(&self.lu, Some((_, cached)) if *cached == hb0);
        if stale {
            let jac = self.jac.as_ref().expect("set above");
            self.lu = Some((iteration_matrix(jac, hb0)?, hb0));
        }
        Ok(&self.lu.as_ref().expect("set above").0)
    }
}

/// Adaptive BDF integration with order control over `1..=max_order`.
///
/// After each accepted step the controller compares the step sizes that
/// orders `q - 1`, `q` and `q + 1` would permit (safety 0.9, growth capped
/// at ×2, shrink floored at ×0.1) and keeps the order that allows the
/// largest step. Order and step increases wait until `q + 1` steps have been
/// taken at the current setting. The last step is clipped to land exactly on
/// `x_end`.
pub fn integrate_adaptive(
    problem: &OdeProblem,
    config: &SolverConfig,
) -> Result<IntegrationTrace, IntegrateError> {
    config.validate()?;
    let table = bdf_table(config.max_order)?;
    let x_end = problem.x_end();
    let mut x = problem.x0();
    let mut trace = IntegrationTrace::start(x, problem.y0().to_vec());
    let mut f_current = problem.eval_rhs(x, problem.y0())?;

    let mut hist = History {
        xs: vec![x],
        ys: vec![problem.y0().to_vec()],
        spacing: config.h_init,
        cap: 2 * config.max_order + 3,
    };
    let mut h = config.h_init.min(config.h_max);
    let mut q = 1usize;
    let mut steps_at_setting = 0usize;
    let mut consecutive_rejects = 0usize;
    let mut newton_failures_at_hmin = 0usize;
    let mut cache = JacobianCache {
        jac: None,
        age: 0,
        fresh: false,
        lu: None,
    };

    while x < x_end {
        let remaining = x_end - x;
        let last_step = h >= remaining * (1.0 - 1e-12);
        let h_step = if last_step { remaining } else { h };
        if h_step != hist.spacing {
            hist.regrid(h_step, q);
        }
        let x1 = if last_step { x_end } else { x + h_step };

        let starting = hist.len() == 1;
        q = if starting { 1 } else { q.min(hist.len() - 1) };
        let method = &table[q - 1];
        let (y_pred, predictor_coeff) = if starting {
            let y: Vec<f64> = hist.ys[0]
                .iter()
                .zip(&f_current)
                .map(|(y, f)| y + h_step * f)
                .collect();
            (y, 0.5)
        } else {
            (extrapolate(&hist.y_refs(q + 1)), 1.0)
        };
        let psi = history_term(
            &method.alphas,
            &[method.beta0],
            &hist.y_refs(q),
            &[],
            h_step,
        );
        let hb0 = h_step * method.beta0;

        let attempt = cache
            .factors(problem, x1, &y_pred, hb0)
            .and_then(|lu| solve_corrector(problem, config, x1, hb0, &psi, y_pred.clone(), lu));
        let outcome = match attempt {
            Ok(out) => out,
            Err(IntegrateError::NewtonFailure { .. } | IntegrateError::NonFinite { .. }) => {
                if !cache.fresh {
                    // retry with a Jacobian evaluated here before cutting h
                    cache.invalidate();
                    cache.fresh = true;
                    continue;
                }
                trace.rejected_steps += 1;
                steps_at_setting = 0;
                if h_step <= config.h_min {
                    newton_failures_at_hmin += 1;
                    if newton_failures_at_hmin >= MAX_NEWTON_FAILURES_AT_HMIN {
                        trace.status = TraceStatus::NewtonFailure;
                        break;
                    }
                }
                h = (h_step * NEWTON_SHRINK).max(config.h_min);
                q = 1.max(q.saturating_sub(1));
                hist.regrid(h, q);
                cache.lu = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        cache.fresh = false;
        if outcome.rate > SLOW_CONVERGENCE {
            cache.invalidate();
        }

        let weights: Vec<f64> = hist.ys[0]
            .iter()
            .zip(&outcome.y)
            .map(|(a, b)| config.atol + config.rtol * a.abs().max(b.abs()))
            .collect();
        let scale = method.error_coeff / (predictor_coeff + method.error_coeff);
        let local: Vec<f64> = outcome
            .y
            .iter()
            .zip(&y_pred)
            .map(|(c, p)| scale * (c - p))
            .collect();
        let err = weighted_rms(&local, &weights);

        if err > 1.0 {
            trace.rejected_steps += 1;
            consecutive_rejects += 1;
            steps_at_setting = 0;
            if consecutive_rejects >= 3 {
                q = 1;
            }
            let factor = step_factor(err, q).min(SAFETY);
            let new_h = h_step * factor;
            if new_h < config.h_min {
                trace.status = TraceStatus::StepSizeUnderflow;
                break;
            }
            h = new_h;
            hist.regrid(h, q);
            continue;
        }

        // accepted
        trace.push(x1, outcome.y.clone(), h_step, q, outcome.iters);
        hist.push(x1, outcome.y, h_step);
        f_current = outcome.f;
        x = x1;
        cache.age += 1;
        consecutive_rejects = 0;
        newton_failures_at_hmin = 0;
        steps_at_setting += 1;
        if last_step {
            break;
        }

        // orders are ranked by the unclamped factor; the clamp applies to the step
        let mut best = (q, raw_step_factor(err, q));
        if steps_at_setting > q {
            if q > 1 && hist.len() > q {
                let lower = &table[q - 2];
                let e = lower.error_coeff * hist.backward_difference_norm(q, &weights);
                let r = raw_step_factor(e, q - 1);
                if r > best.1 {
                    best = (q - 1, r);
                }
            }
            if q < config.max_order && hist.len() >= q + 3 {
                let higher = &table[q];
                let e = higher.error_coeff * hist.backward_difference_norm(q + 2, &weights);
                let r = raw_step_factor(e, q + 1);
                if r > best.1 {
                    best = (q + 1, r);
                }
            }
            let (new_q, raw) = best;
            let factor = raw.clamp(MIN_SHRINK, MAX_GROWTH);
            let new_h = if factor >= MIN_WORTHWHILE_GROWTH || new_q < q {
                (h_step * factor).min(config.h_max)
            } else {
                h_step
            };
            if new_q != q || new_h != h_step {
                steps_at_setting = 0;
            }
            q = new_q;
            h = new_h;
        } else {
            h = h_step;
        }
    }
    Ok(trace)
}
