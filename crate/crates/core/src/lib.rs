//! Linear multistep integrators for stiff initial value problems.
//!
//! The crate is organised bottom-up:
//!
//! * [`methods`] derives BDF (Gear) and Adams-Moulton coefficients in exact
//!   rational arithmetic.
//! * [`linalg`] holds the small dense kernels everything else leans on: LU
//!   solves, Aberth-Ehrlich polynomial roots and Hessenberg-QR eigenvalues.
//! * [`stability`] traces boundary loci in the `hλ` plane, applies the root
//!   condition, and extracts the stiff-stability abscissa.
//! * [`integrate`] runs explicit reference steppers, the implicit multistep
//!   corrector, and fixed-step and adaptive (variable order and step) drivers.

pub mod integrate;
pub mod linalg;
pub mod methods;
pub mod stability;

pub use integrate::{
    IntegrateError, IntegrationTrace, OdeProblem, ParamValue, Scheme, SolverConfig, TraceStatus,
};
pub use linalg::{ComplexMatrix, ComplexPolynomial, DenseMatrix, LinalgError};
pub use methods::{Family, LinearMultistepMethod, MethodError, Rational, RationalPolynomial};
pub use stability::{StabilityError, StabilityLocus, StiffStabilityReport};

/// Complex number used for `σ = hλ`, roots `z` and eigenvalues.
pub type ComplexNumber = num_complex::Complex64;
