use super::{IntegrateError, OdeProblem};

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn check_step(h: f64) -> Result<(), IntegrateError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(IntegrateError::InvalidConfig(format!(
            "step size must be positive, got {h}"
        )))
    }
}

/// `y + h·F(x, y)`.
pub fn step_explicit_euler(
    problem: &OdeProblem,
    x: f64,
    y: &[f64],
    h: f64,
) -> Result<Vec<f64>, IntegrateError> {
    check_step(h)?;
    let f = problem.eval_rhs(x, y)?;
    Ok(axpy(y, h, &f))
}

/// Classic four-stage Runge-Kutta step.
pub fn step_rk4(
    problem: &OdeProblem,
    x: f64,
    y: &[f64],
    h: f64,
) -> Result<Vec<f64>, IntegrateError> {
    check_step(h)?;
    let k1 = problem.eval_rhs(x, y)?;
    let k2 = problem.eval_rhs(x + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = problem.eval_rhs(x + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = problem.eval_rhs(x + h, &axpy(y, h, &k3))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| yi + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
        .collect())
}
