//! Initial value problem integration.
//!
//! Explicit reference steppers, the implicit multistep corrector, a
//! fixed-step driver that ramps the order up from one, and an adaptive BDF
//! driver with step-size and order control.

mod adaptive;
mod explicit;
mod fixed;
mod implicit;
mod library;
mod problem;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::methods::MethodError;

pub use adaptive::integrate_adaptive;
pub use explicit::{step_explicit_euler, step_rk4};
pub use fixed::{integrate_fixed, integrate_fixed_with, Scheme, StartMode};
pub use implicit::step_lmm_implicit;
pub use library::{
    decouple_linear_system, problem_library, DecoupledSystem, ParamValue, ProblemParams, ScalarMode,
};
pub use problem::{ExactFn, JacobianFn, OdeProblem, RhsFn};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("right-hand side returned {got} values, expected {expected}")]
    RhsDimension { expected: usize, got: usize },
    #[error("non-finite value while evaluating at x = {x}")]
    NonFinite { x: f64 },
    #[error("step size {h} does not divide the interval length {length}")]
    StepDoesNotDivide { h: f64, length: f64 },
    #[error("Newton iteration failed to converge at x = {x} after {iterations} iterations")]
    NewtonFailure {
        x: f64,
        iterations: usize,
        last: Vec<f64>,
    },
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tolerances and limits for the implicit corrector and the adaptive driver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Highest BDF order the adaptive controller may select (1..=6).
    pub max_order: usize,
    /// Newton stops once `‖Δy‖∞ ≤ newton_tol·(atol + rtol·‖y‖∞)`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-6,
            h_init: 1e-4,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_order: 5,
            newton_tol: 0.1,
            newton_max_iters: 7,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Tight settings used by the fixed-step driver, where the corrector must
    /// converge well below the discretisation error.
    pub fn tight() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-13,
            newton_tol: 1.0,
            newton_max_iters: 20,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(IntegrateError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("rtol", self.rtol)?;
        positive("atol", self.atol)?;
        positive("h_init", self.h_init)?;
        positive("h_min", self.h_min)?;
        positive("h_max", self.h_max)?;
        positive("newton_tol", self.newton_tol)?;
        if !(self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(IntegrateError::InvalidConfig(format!(
                "need h_min ≤ h_init ≤ h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if !(1..=6).contains(&self.max_order) {
            return Err(IntegrateError::InvalidConfig(format!(
                "max_order must be in 1..=6, got {}",
                self.max_order
            )));
        }
        if self.newton_max_iters == 0 {
            return Err(IntegrateError::InvalidConfig(
                "newton_max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    Completed,
    StepSizeUnderflow,
    NewtonFailure,
}

/// Accepted steps of one integration run. Entry 0 is the initial condition
/// (step size 0, order 0).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationTrace {
    pub xs: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub hs: Vec<f64>,
    pub orders: Vec<usize>,
    pub newton_iters: Vec<usize>,
    pub status: TraceStatus,
    /// Steps tried and rejected by the error test or a Newton failure.
    pub rejected_steps: usize,
}

impl IntegrationTrace {
    pub(crate) fn start(x0: f64, y0: Vec<f64>) -> Self {
        Self {
            xs: vec![x0],
            ys: vec![y0],
            hs: vec![0.0],
            orders: vec![0],
            newton_iters: vec![0],
            status: TraceStatus::Completed,
            rejected_steps: 0,
        }
    }

    pub(crate) fn push(&mut self, x: f64, y: Vec<f64>, h: f64, order: usize, iters: usize) {
        self.xs.push(x);
        self.ys.push(y);
        self.hs.push(h);
        self.orders.push(order);
        self.newton_iters.push(iters);
    }

    /// Number of accepted steps (entries after the initial condition).
    pub fn steps(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn last_x(&self) -> f64 {
        *self.xs.last().expect("trace is never empty")
    }

    pub fn last_y(&self) -> &[f64] {
        self.ys.last().expect("trace is never empty")
    }

    pub fn max_order_used(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }

    /// `max_i |y_i - exact_i|` at the last accepted point, when the problem
    /// carries an exact solution.
    pub fn final_error(&self, problem: &OdeProblem) -> Option<f64> {
        let exact = problem.exact_at(self.last_x())?;
        Some(
            self.last_y()
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }

    /// Checks the structural invariants: equal lengths, strictly increasing
    /// abscissae.
    pub fn is_well_formed(&self) -> bool {
        let n = self.xs.len();
        n >= 1
            && self.ys.len() == n
            && self.hs.len() == n
            && self.orders.len() == n
            && self.newton_iters.len() == n
            && self.xs.windows(2).all(|w| w[0] < w[1])
    }
}

/// `max_i |v_i|`.
pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
