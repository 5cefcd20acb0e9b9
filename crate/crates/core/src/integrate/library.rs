//! Built-in test problems and modal decoupling of constant linear systems.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{IntegrateError, OdeProblem};
use crate::linalg::{eigendecompose, ComplexMatrix, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(DenseMatrix),
}

pub type ProblemParams = BTreeMap<String, ParamValue>;

struct Params<'a> {
    problem: &'a str,
    map: &'a ProblemParams,
}

impl Params<'_> {
    fn check_keys(&self, allowed: &[&str]) -> Result<(), IntegrateError> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(IntegrateError::BadParameter(format!(
                "{} does not take parameter {k:?} (allowed: {})",
                self.problem,
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn scalar(&self, key: &str, default: f64) -> Result<f64, IntegrateError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(other) => Err(IntegrateError::BadParameter(format!(
                "{key} must be a finite scalar, got {other:?}"
            ))),
        }
    }

    fn vector(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, IntegrateError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(ParamValue::Vector(v)) => Ok(v.clone()),
            Some(ParamValue::Scalar(v)) => Ok(vec![*v]),
            Some(other) => Err(IntegrateError::BadParameter(format!(
                "{key} must be a vector, got {other:?}"
            ))),
        }
    }
}

/// Looks up a built-in problem.
///
/// * `dahlquist`: `y' = λy`. Parameters `lambda` (default -1), `lambda_im`
///   (default 0; a nonzero value gives the real 2-D form of the complex
///   equation), `y0` (default 1).
/// * `linear_system`: `Y' = AY`. Parameters `matrix` (required), `y0`
///   (default all ones). Carries an exact solution when `A` is
///   diagonalisable with distinct eigenvalues.
/// * `van_der_pol`: `y1' = y2`, `y2' = μ(1 - y1²)y2 - y1`. Parameters `mu`
///   (default 1), `y0` (default `[2, 0]`).
///
/// All accept `x0` (default 0) and `x_end` (default 1, or 10 for
/// `van_der_pol`).
pub fn problem_library(name: &str, params: &ProblemParams) -> Result<OdeProblem, IntegrateError> {
    let p = Params {
        problem: name,
        map: params,
    };
    match name {
        "dahlquist" => {
            p.check_keys(&["lambda", "lambda_im", "y0", "x0", "x_end"])?;
            let lambda = Complex64::new(p.scalar("lambda", -1.0)?, p.scalar("lambda_im", 0.0)?);
            let y0 = p.scalar("y0", 1.0)?;
            let x0 = p.scalar("x0", 0.0)?;
            let x_end = p.scalar("x_end", 1.0)?;
            Ok(dahlquist(lambda, Complex64::new(y0, 0.0), x0, x_end)?.with_name("dahlquist"))
        }
        "linear_system" => {
            p.check_keys(&["matrix", "y0", "x0", "x_end"])?;
            let a = match params.get("matrix") {
                Some(ParamValue::Matrix(m)) => m.clone(),
                Some(other) => {
                    return Err(IntegrateError::BadParameter(format!(
                        "matrix must be a matrix, got {other:?}"
                    )))
                }
                None => {
                    return Err(IntegrateError::BadParameter(
                        "linear_system requires a matrix".into(),
                    ))
                }
            };
            if !a.is_square() || a.rows() == 0 {
                return Err(IntegrateError::BadParameter(format!(
                    "matrix must be square and non-empty, got {}x{}",
                    a.rows(),
                    a.cols()
                )));
            }
            let y0 = p.vector("y0", vec![1.0; a.rows()])?;
            if y0.len() != a.rows() {
                return Err(IntegrateError::BadParameter(format!(
                    "y0 has {} components, matrix is {}x{}",
                    y0.len(),
                    a.rows(),
                    a.cols()
                )));
            }
            let x0 = p.scalar("x0", 0.0)?;
            let x_end = p.scalar("x_end", 1.0)?;
            linear_system(a, y0, x0, x_end)
        }
        "van_der_pol" => {
            p.check_keys(&["mu", "y0", "x0", "x_end"])?;
            let mu = p.scalar("mu", 1.0)?;
            let y0 = p.vector("y0", vec![2.0, 0.0])?;
            if y0.len() != 2 {
                return Err(IntegrateError::BadParameter(
                    "van_der_pol y0 needs two components".into(),
                ));
            }
            let x0 = p.scalar("x0", 0.0)?;
            let x_end = p.scalar("x_end", 10.0)?;
            Ok(OdeProblem::new(y0, x0, x_end, move |_, y| {
                vec![y[1], mu * (1.0 - y[0] * y[0]) * y[1] - y[0]]
            })?
            .with_jacobian(move |_, y| {
                DenseMatrix::from_rows(&[
                    vec![0.0, 1.0],
                    vec![-2.0 * mu * y[0] * y[1] - 1.0, mu * (1.0 - y[0] * y[0])],
                ])
                .expect("2x2 finite")
            })
            .with_name("van_der_pol"))
        }
        other => Err(IntegrateError::UnknownProblem(other.to_string())),
    }
}

/// `z' = λz`, `z(x0) = z0`. Real `λ` and `z0` give a scalar problem; anything
/// else gives the real 2-D form `[Re z, Im z]`.
fn dahlquist(
    lambda: Complex64,
    z0: Complex64,
    x0: f64,
    x_end: f64,
) -> Result<OdeProblem, IntegrateError> {
    if lambda.im == 0.0 && z0.im == 0.0 {
        let l = lambda.re;
        let y0 = z0.re;
        return Ok(
            OdeProblem::new(vec![y0], x0, x_end, move |_, y| vec![l * y[0]])?
                .with_jacobian(move |_, _| DenseMatrix::diag(&[l]))
                .with_exact(move |x| vec![y0 * (l * (x - x0)).exp()]),
        );
    }
    let (a, b) = (lambda.re, lambda.im);
    Ok(OdeProblem::new(vec![z0.re, z0.im], x0, x_end, move |_, y| {
        vec![a * y[0] - b * y[1], b * y[0] + a * y[1]]
    })?
    .with_jacobian(move |_, _| {
        DenseMatrix::from_rows(&[vec![a, -b], vec![b, a]]).expect("2x2 finite")
    })
    .with_exact(move |x| {
        let z = z0 * (lambda * (x - x0)).exp();
        vec![z.re, z.im]
    }))
}

fn linear_system(
    a: DenseMatrix,
    y0: Vec<f64>,
    x0: f64,
    x_end: f64,
) -> Result<OdeProblem, IntegrateError> {
    let rhs_a = a.clone();
    let jac_a = a.clone();
    let problem = OdeProblem::new(y0.clone(), x0, x_end, move |_, y| rhs_a.mul_vec(y))?
        .with_jacobian(move |_, _| jac_a.clone())
        .with_name("linear_system");
    Ok(match decouple_linear_system(&a, &y0, x0, x_end) {
        Ok(modes) => problem.with_exact(move |x| modes.exact(x)),
        Err(_) => problem,
    })
}

/// One decoupled mode `z' = λz`.
#[derive(Debug, Clone)]
pub struct ScalarMode {
    pub lambda: Complex64,
    pub z0: Complex64,
    /// The mode as an integrable problem (1-D when `λ` and `z0` are real,
    /// otherwise the real 2-D form).
    pub problem: OdeProblem,
}

/// `Y' = AY` rewritten in the eigenbasis: `Y = T·Z`, `Z' = diag(λ)·Z`.
#[derive(Debug, Clone)]
pub struct DecoupledSystem {
    pub modes: Vec<ScalarMode>,
    basis: ComplexMatrix,
    x0: f64,
}

impl DecoupledSystem {
    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    /// `Re(T·Z)`.
    pub fn recompose(&self, z: &[Complex64]) -> Vec<f64> {
        self.basis.mul_vec(z).into_iter().map(|c| c.re).collect()
    }

    /// Exact solution of the original system assembled from the modes.
    pub fn exact(&self, x: f64) -> Vec<f64> {
        let z: Vec<Complex64> = self
            .modes
            .iter()
            .map(|m| m.z0 * (m.lambda * (x - self.x0)).exp())
            .collect();
        self.recompose(&z)
    }

    /// Recomposes from per-mode states as produced by integrating each
    /// `mode.problem` (1 or 2 real components per mode).
    pub fn recompose_states(&self, states: &[Vec<f64>]) -> Vec<f64> {
        let z: Vec<Complex64> = states
            .iter()
            .map(|s| Complex64::new(s[0], s.get(1).copied().unwrap_or(0.0)))
            .collect();
        self.recompose(&z)
    }
}

/// Splits `Y' = AY` into independent scalar equations via the eigenvector
/// basis of `A`. Requires distinct, well-separated eigenvalues.
pub fn decouple_linear_system(
    a: &DenseMatrix,
    y0: &[f64],
    x0: f64,
    x_end: f64,
) -> Result<DecoupledSystem, IntegrateError> {
    if y0.len() != a.rows() {
        return Err(IntegrateError::BadParameter(format!(
            "y0 has {} components, matrix is {}x{}",
            y0.len(),
            a.rows(),
            a.cols()
        )));
    }
    let (basis, lambdas) = eigendecompose(a)?;
    let y0c: Vec<Complex64> = y0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let z0 = basis.solve(&y0c)?;
    let modes = lambdas
        .into_iter()
        .zip(z0)
        .map(|(lambda, z0)| {
            // drop rounding noise so real modes stay 1-D
            let z0 = if z0.im.abs() <= 1e-14 * (1.0 + z0.re.abs()) && lambda.im == 0.0 {
                Complex64::new(z0.re, 0.0)
            } else {
                z0
            };
            Ok(ScalarMode {
                lambda,
                z0,
                problem: dahlquist(lambda, z0, x0, x_end)?.with_name("mode"),
            })
        })
        .collect::<Result<Vec<_>, IntegrateError>>()?;
    Ok(DecoupledSystem { modes, basis, x0 })
}
