//! Fixtures shared by the benchmarks.

use stiffode::integrate::{problem_library, ParamValue, ProblemParams};
use stiffode::OdeProblem;

/// `y' = λy` on `[0, x_end]` from `y(0) = 1`.
pub fn dahlquist(lambda: f64, x_end: f64) -> OdeProblem {
    library("dahlquist", &[("lambda", lambda), ("x_end", x_end)])
}

/// Van der Pol oscillator with stiffness parameter `mu` on `[0, x_end]`.
pub fn van_der_pol(mu: f64, x_end: f64) -> OdeProblem {
    library("van_der_pol", &[("mu", mu), ("x_end", x_end)])
}

fn library(name: &str, scalars: &[(&str, f64)]) -> OdeProblem {
    let params: ProblemParams = scalars
        .iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Scalar(*v)))
        .collect();
    problem_library(name, &params).expect("library problem with valid parameters")
}
