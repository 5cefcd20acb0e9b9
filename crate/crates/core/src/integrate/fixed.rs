use super::explicit::{step_explicit_euler, step_rk4};
use super::implicit::step_lmm_implicit;
use super::{IntegrateError, IntegrationTrace, OdeProblem, SolverConfig, TraceStatus};
use crate::methods::{method_of_order, Family, LinearMultistepMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ExplicitEuler,
    Rk4,
    Bdf,
    AdamsMoulton,
}

impl Scheme {
    pub fn family(self) -> Option<Family> {
        match self {
            Scheme::Bdf => Some(Family::Bdf),
            Scheme::AdamsMoulton => Some(Family::AdamsMoulton),
            Scheme::ExplicitEuler | Scheme::Rk4 => None,
        }
    }

    /// Order of accuracy of the explicit schemes.
    fn explicit_order(self) -> usize {
        match self {
            Scheme::Rk4 => 4,
            _ => 1,
        }
    }
}

/// How a multistep scheme obtains its first `k - 1` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartMode {
    /// Self-starting: step `i` uses order `min(i, order)`.
    #[default]
    Ramp,
    /// Take the starting values from the problem's exact solution. They are
    /// recorded in the trace with order 0.
    Exact,
}

/// Fixed-step integration over the problem's interval with a ramped start.
///
/// `order` selects the multistep method; it is ignored by the explicit
/// schemes. `h` must divide `x_end - x0` to within `1e-12` relative.
pub fn integrate_fixed(
    problem: &OdeProblem,
    scheme: Scheme,
    order: usize,
    h: f64,
) -> Result<IntegrationTrace, IntegrateError> {
    integrate_fixed_with(
        problem,
        scheme,
        order,
        h,
        &SolverConfig::tight(),
        StartMode::Ramp,
    )
}

pub fn integrate_fixed_with(
    problem: &OdeProblem,
    scheme: Scheme,
    order: usize,
    h: f64,
    config: &SolverConfig,
    start: StartMode,
) -> Result<IntegrationTrace, IntegrateError> {
    let x0 = problem.x0();
    let length = problem.x_end() - x0;
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrateError::InvalidConfig(format!(
            "step size must be positive, got {h}"
        )));
    }
    let steps = (length / h).round();
    if steps < 1.0 || (steps * h - length).abs() > 1e-12 * length {
        return Err(IntegrateError::StepDoesNotDivide { h, length });
    }
    let steps = steps as usize;
    let grid = |i: usize| {
        if i == steps {
            problem.x_end()
        } else {
            x0 + i as f64 * h
        }
    };
    let mut trace = IntegrationTrace::start(x0, problem.y0().to_vec());

    let Some(family) = scheme.family() else {
        let p = scheme.explicit_order();
        let mut y = problem.y0().to_vec();
        for i in 0..steps {
            y = match scheme {
                Scheme::Rk4 => step_rk4(problem, grid(i), &y, h)?,
                _ => step_explicit_euler(problem, grid(i), &y, h)?,
            };
            if y.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::NonFinite { x: grid(i + 1) });
            }
            trace.push(grid(i + 1), y.clone(), h, p, 0);
        }
        return Ok(trace);
    };

    let methods: Vec<LinearMultistepMethod> = (1..=order)
        .map(|q| method_of_order(family, q))
        .collect::<Result<_, _>>()?;
    let full = methods
        .last()
        .expect("order ≥ 1 checked by method_of_order");
    if start == StartMode::Exact && !problem.has_exact() {
        return Err(IntegrateError::InvalidProblem(
            "exact starting values requested but the problem has no exact solution".into(),
        ));
    }
    let exact_prefix = match start {
        StartMode::Exact => full.steps() - 1,
        StartMode::Ramp => 0,
    };

    // newest first
    let mut hx = vec![x0];
    let mut hy = vec![problem.y0().to_vec()];
    let mut hf = vec![problem.eval_rhs(x0, problem.y0())?];
    let keep = full.steps().max(full.betas().len());

    for i in 1..=steps {
        let x = grid(i);
        let (y, used_order, iters) = if i <= exact_prefix {
            let y = problem.exact_at(x).expect("checked above");
            (y, 0, 0)
        } else {
            let method = match start {
                StartMode::Ramp => &methods[i.min(order) - 1],
                StartMode::Exact => full,
            };
            let k = method.steps();
            match step_lmm_implicit(method, problem, &hx[..k], &hy[..k], &hf, h, config) {
                Ok((y, iters)) => (y, method.order(), iters),
                Err(IntegrateError::NewtonFailure { .. }) => {
                    trace.status = TraceStatus::NewtonFailure;
                    return Ok(trace);
                }
                Err(e) => return Err(e),
            }
        };
        let f = problem.eval_rhs(x, &y)?;
        trace.push(x, y.clone(), h, used_order, iters);
        hx.insert(0, x);
        hy.insert(0, y);
        hf.insert(0, f);
        hx.truncate(keep);
        hy.truncate(keep);
        hf.truncate(keep);
    }
    Ok(trace)
}
