use std::fmt;
use std::sync::Arc;

use super::IntegrateError;
use crate::linalg::DenseMatrix;

pub type RhsFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
pub type JacobianFn = dyn Fn(f64, &[f64]) -> DenseMatrix + Send + Sync;
pub type ExactFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// `y' = F(x, y)`, `y(x0) = y0`, `x ∈ [x0, x_end]`.
///
/// The right-hand side must be safe to evaluate repeatedly; it may be shared
/// between concurrent runs.
#[derive(Clone)]
pub struct OdeProblem {
    name: String,
    rhs: Arc<RhsFn>,
    jacobian: Option<Arc<JacobianFn>>,
    exact: Option<Arc<ExactFn>>,
    x0: f64,
    y0: Vec<f64>,
    x_end: f64,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("x0", &self.x0)
            .field("y0", &self.y0)
            .field("x_end", &self.x_end)
            .field("jacobian", &self.jacobian.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn new(
        y0: Vec<f64>,
        x0: f64,
        x_end: f64,
        rhs: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self, IntegrateError> {
        if y0.is_empty() {
            return Err(IntegrateError::InvalidProblem(
                "initial state must not be empty".into(),
            ));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::InvalidProblem(
                "initial state must be finite".into(),
            ));
        }
        let problem = Self {
            name: "custom".into(),
            rhs: Arc::new(rhs),
            jacobian: None,
            exact: None,
            x0,
            y0,
            x_end,
        };
        problem.check_interval(x0, x_end)?;
        Ok(problem)
    }

    fn check_interval(&self, x0: f64, x_end: f64) -> Result<(), IntegrateError> {
        if !(x0.is_finite() && x_end.is_finite() && x_end > x0) {
            return Err(IntegrateError::InvalidProblem(format!(
                "need finite x0 < x_end, got [{x0}, {x_end}]"
            )));
        }
        Ok(())
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(f64, &[f64]) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_exact(mut self, exact: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Same equation on a different interval. The initial state is kept.
    pub fn with_interval(mut self, x0: f64, x_end: f64) -> Result<Self, IntegrateError> {
        self.check_interval(x0, x_end)?;
        self.x0 = x0;
        self.x_end = x_end;
        Ok(self)
    }

    pub fn with_initial_state(mut self, y0: Vec<f64>) -> Result<Self, IntegrateError> {
        if y0.len() != self.y0.len() {
            return Err(IntegrateError::InvalidProblem(format!(
                "initial state has {} components, expected {}",
                y0.len(),
                self.y0.len()
            )));
        }
        self.y0 = y0;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> &[f64] {
        &self.y0
    }

    pub fn x_end(&self) -> f64 {
        self.x_end
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Evaluates `F(x, y)`, checking length and finiteness.
    pub fn eval_rhs(&self, x: f64, y: &[f64]) -> Result<Vec<f64>, IntegrateError> {
        let f = (self.rhs)(x, y);
        if f.len() != self.dimension() {
            return Err(IntegrateError::RhsDimension {
                expected: self.dimension(),
                got: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { x });
        }
        Ok(f)
    }

    /// `∂F/∂y` at `(x, y)`: the supplied Jacobian, or forward differences with
    /// perturbation `√ε·(1 + |y_j|)` in column `j`. `f` must equal `F(x, y)`.
    pub fn jacobian_at(&self, x: f64, y: &[f64], f: &[f64]) -> Result<DenseMatrix, IntegrateError> {
        let n = self.dimension();
        if let Some(jac) = &self.jacobian {
            let j = jac(x, y);
            if j.rows() != n || j.cols() != n {
                return Err(IntegrateError::InvalidProblem(format!(
                    "Jacobian is {}x{}, expected {n}x{n}",
                    j.rows(),
                    j.cols()
                )));
            }
            return Ok(j);
        }
        let sqrt_eps = f64::EPSILON.sqrt();
        let mut jac = DenseMatrix::zeros(n, n);
        let mut shifted = y.to_vec();
        for col in 0..n {
            let delta = sqrt_eps * (1.0 + y[col].abs());
            shifted[col] = y[col] + delta;
            let fp = self.eval_rhs(x, &shifted)?;
            shifted[col] = y[col];
            for row in 0..n {
                jac[(row, col)] = (fp[row] - f[row]) / delta;
            }
        }
        Ok(jac)
    }

    pub fn exact_at(&self, x: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|e| e(x))
    }
}
