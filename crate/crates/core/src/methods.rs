//! Coefficient sets for linear multistep methods.
//!
//! Every method is stored in the normalised form
//!
//! ```text
//! y[n+1] = Σ_{i=1..k} α_i y[n+1-i] + h Σ_{j=0..q} β_j f[n+1-j]
//! ```
//!
//! so one corrector serves both families. BDF methods have `β_1 = … = β_q = 0`;
//! Adams-Moulton methods have `α = [1, 0, …, 0]`. Coefficients are derived from
//! their generating relations in exact rational arithmetic rather than
//! tabulated.

use std::fmt;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational used for method coefficients. Always kept in lowest terms
/// with a positive denominator.
pub type Rational = Ratio<i64>;

pub const MAX_BDF_ORDER: usize = 7;
/// Largest Adams-Moulton `q` (number of past derivative terms); order is `q + 1`.
pub const MAX_ADAMS_MOULTON_Q: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MethodError {
    #[error("{family} order {order} is outside the supported range {min}..={max}")]
    OrderOutOfRange {
        family: Family,
        order: usize,
        min: usize,
        max: usize,
    },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Bdf,
    AdamsMoulton,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Bdf => f.write_str("BDF"),
            Family::AdamsMoulton => f.write_str("Adams-Moulton"),
        }
    }
}

/// A linear multistep method with exact coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearMultistepMethod {
    alphas: Vec<Rational>,
    betas: Vec<Rational>,
    order: usize,
    family: Family,
}

impl LinearMultistepMethod {
    /// Builds a method from raw coefficients, checking the family shape,
    /// consistency and the claimed order of exactness.
    pub fn from_coefficients(
        family: Family,
        alphas: Vec<Rational>,
        betas: Vec<Rational>,
        order: usize,
    ) -> Result<Self, MethodError> {
        if alphas.is_empty() || betas.is_empty() || order == 0 {
            return Err(MethodError::InvalidCoefficients(
                "need at least one α, one β and order ≥ 1".into(),
            ));
        }
        if betas.len() > alphas.len() + 1 {
            return Err(MethodError::InvalidCoefficients(format!(
                "{} β terms reach further back than {} history values",
                betas.len(),
                alphas.len()
            )));
        }
        match family {
            Family::Bdf => {
                if betas[1..].iter().any(|b| !b.is_zero()) || betas[0] <= Rational::zero() {
                    return Err(MethodError::InvalidCoefficients(
                        "BDF requires β_0 > 0 and β_1..β_q = 0".into(),
                    ));
                }
            }
            Family::AdamsMoulton => {
                if !alphas[0].is_one() || alphas[1..].iter().any(|a| !a.is_zero()) {
                    return Err(MethodError::InvalidCoefficients(
                        "Adams-Moulton requires α = [1, 0, …, 0]".into(),
                    ));
                }
            }
        }
        let method = Self {
            alphas,
            betas,
            order,
            family,
        };
        if !method.is_consistent() {
            return Err(MethodError::InvalidCoefficients(
                "ρ(1) = 0 and ρ'(1) = s(1) must hold".into(),
            ));
        }
        if let Some(m) = (0..=order).find(|&m| !method.monomial_residual(m).is_zero()) {
            return Err(MethodError::InvalidCoefficients(format!(
                "not exact for x^{m}, so order {order} is not attained"
            )));
        }
        Ok(method)
    }

    pub fn alphas(&self) -> &[Rational] {
        &self.alphas
    }

    pub fn betas(&self) -> &[Rational] {
        &self.betas
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Number of past solution values the method reads (`k`). This is also the
    /// degree of the characteristic polynomials.
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    pub fn beta0(&self) -> Rational {
        self.betas[0]
    }

    pub fn alphas_f64(&self) -> Vec<f64> {
        self.alphas.iter().map(to_f64).collect()
    }

    pub fn betas_f64(&self) -> Vec<f64> {
        self.betas.iter().map(to_f64).collect()
    }

    /// Characteristic polynomials `(ρ, s)`, see [`rho_sigma_polynomials`].
    pub fn rho_sigma(&self) -> (RationalPolynomial, RationalPolynomial) {
        let k = self.steps();
        let mut rho = vec![Rational::zero(); k + 1];
        rho[k] = Rational::one();
        for (i, a) in self.alphas.iter().enumerate() {
            rho[k - 1 - i] -= a;
        }
        let mut s = vec![Rational::zero(); k + 1];
        for (j, b) in self.betas.iter().enumerate() {
            s[k - j] += b;
        }
        (RationalPolynomial::new(rho), RationalPolynomial::new(s))
    }

    pub fn is_consistent(&self) -> bool {
        let (rho, s) = self.rho_sigma();
        let one = Rational::one();
        rho.eval(one).is_zero() && rho.derivative().eval(one) == s.eval(one)
    }

    /// Residual of the step relation applied to `y(x) = x^m` on the unit grid
    /// `x[n+1] = 0, x[n+1-i] = -i` with `h = 1`:
    ///
    /// `y(0) - Σ α_i y(-i) - Σ β_j y'(-j)`.
    ///
    /// Zero for every `m ≤ order`.
    pub fn monomial_residual(&self, m: usize) -> Rational {
        let y = |x: i64| pow_i(Rational::from_integer(x), m);
        let dy = |x: i64| {
            if m == 0 {
                Rational::zero()
            } else {
                Rational::from_integer(m as i64) * pow_i(Rational::from_integer(x), m - 1)
            }
        };
        let mut r = y(0);
        for (i, a) in self.alphas.iter().enumerate() {
            r -= a * y(-(i as i64 + 1));
        }
        for (j, b) in self.betas.iter().enumerate() {
            r -= b * dy(-(j as i64));
        }
        r
    }

    /// Error constant `C` in `y(x+h) - Σα y - hΣβ y' = C h^{p+1} y^{(p+1)} + …`.
    pub fn error_constant(&self) -> Rational {
        let p = self.order + 1;
        let fact: i64 = (1..=p as i64).product();
        self.monomial_residual(p) / Rational::from_integer(fact)
    }
}

/// BDF (Gear) method of the given order, from
/// `Σ_{j=1..q} (1/j) ∇^j y[n+1] = h f[n+1]` normalised to a unit leading
/// coefficient.
pub fn bdf_coefficients(order: usize) -> Result<LinearMultistepMethod, MethodError> {
    if !(1..=MAX_BDF_ORDER).contains(&order) {
        return Err(MethodError::OrderOutOfRange {
            family: Family::Bdf,
            order,
            min: 1,
            max: MAX_BDF_ORDER,
        });
    }
    // c[r] multiplies y[n+1-r] after expanding the backward differences.
    let mut c = vec![Rational::zero(); order + 1];
    for j in 1..=order {
        let weight = Rational::new(1, j as i64);
        for (r, cr) in c.iter_mut().enumerate().take(j + 1) {
            let sign = if r % 2 == 0 { 1 } else { -1 };
            *cr += weight * Rational::from_integer(sign * binomial(j, r));
        }
    }
    let lead = c[0];
    let alphas = c[1..].iter().map(|cr| -cr / lead).collect();
    let mut betas = vec![Rational::zero(); order + 1];
    betas[0] = lead.recip();
    Ok(LinearMultistepMethod {
        alphas,
        betas,
        order,
        family: Family::Bdf,
    })
}

/// Adams-Moulton method with `q + 1` derivative terms (order `q + 1`). The
/// weights integrate the interpolant of `f` through `x[n+1], …, x[n+1-q]` over
/// one step.
pub fn adams_moulton_coefficients(q: usize) -> Result<LinearMultistepMethod, MethodError> {
    if q > MAX_ADAMS_MOULTON_Q {
        return Err(MethodError::OrderOutOfRange {
            family: Family::AdamsMoulton,
            order: q,
            min: 0,
            max: MAX_ADAMS_MOULTON_Q,
        });
    }
    // Node for f[n+1-j] sits at s = 1 - j in units of h, relative to x[n].
    let nodes: Vec<Rational> = (0..=q)
        .map(|j| Rational::from_integer(1 - j as i64))
        .collect();
    let betas = (0..=q)
        .map(|j| {
            let mut basis = RationalPolynomial::new(vec![Rational::one()]);
            for (m, node) in nodes.iter().enumerate() {
                if m == j {
                    continue;
                }
                let scale = (nodes[j] - node).recip();
                basis = basis.mul(&RationalPolynomial::new(vec![-node * scale, scale]));
            }
            basis.integral_unit()
        })
        .collect();
    let steps = q.max(1);
    let mut alphas = vec![Rational::zero(); steps];
    alphas[0] = Rational::one();
    Ok(LinearMultistepMethod {
        alphas,
        betas,
        order: q + 1,
        family: Family::AdamsMoulton,
    })
}

/// Adams-Moulton method selected by its order (`1..=6`).
pub fn adams_moulton_of_order(order: usize) -> Result<LinearMultistepMethod, MethodError> {
    if order == 0 {
        return Err(MethodError::OrderOutOfRange {
            family: Family::AdamsMoulton,
            order,
            min: 1,
            max: MAX_ADAMS_MOULTON_Q + 1,
        });
    }
    adams_moulton_coefficients(order - 1)
}

/// Method of a family selected by order of accuracy.
pub fn method_of_order(family: Family, order: usize) -> Result<LinearMultistepMethod, MethodError> {
    match family {
        Family::Bdf => bdf_coefficients(order),
        Family::AdamsMoulton => adams_moulton_of_order(order),
    }
}

/// The pair `(ρ, s)` with `ρ(z) = z^k - Σ α_i z^{k-i}` and
/// `s(z) = Σ β_j z^{k-j}`. Applying the method to `y' = λy` gives the
/// recurrence whose characteristic polynomial is `ρ(z) - hλ·s(z)`.
pub fn rho_sigma_polynomials(
    method: &LinearMultistepMethod,
) -> (RationalPolynomial, RationalPolynomial) {
    method.rho_sigma()
}

/// Polynomial with exact rational coefficients, ascending degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPolynomial {
    coeffs: Vec<Rational>,
}

impl RationalPolynomial {
    /// Trailing zero coefficients are dropped; the zero polynomial keeps a
    /// single zero coefficient.
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Rational::zero());
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + to_f64(c))
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Rational::from_integer(i as i64))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![Rational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// `∫_0^1 p(s) ds`.
    fn integral_unit(&self) -> Rational {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / Rational::from_integer(i as i64 + 1))
            .sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }
}

impl fmt::Display for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() && self.coeffs.len() > 1 {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.abs();
            match i {
                0 => write!(f, "{mag}")?,
                _ if mag.is_one() => {}
                _ => write!(f, "({mag})")?,
            }
            match i {
                0 => {}
                1 => f.write_str("z")?,
                _ => write!(f, "z^{i}")?,
            }
        }
        Ok(())
    }
}

pub(crate) fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("coefficient fits in f64")
}

fn binomial(n: usize, k: usize) -> i64 {
    (0..k).fold(1i64, |acc, i| acc * (n - i) as i64 / (i as i64 + 1))
}

fn pow_i(x: Rational, m: usize) -> Rational {
    (0..m).fold(Rational::one(), |acc, _| acc * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn bdf1_is_implicit_euler() {
        let m = bdf_coefficients(1).unwrap();
        assert_eq!(m.alphas(), &[r(1, 1)]);
        assert_eq!(m.beta0(), r(1, 1));
        assert_eq!(m.order(), 1);
    }

    #[test]
    fn bdf2_coefficients() {
        let m = bdf_coefficients(2).unwrap();
        assert_eq!(m.alphas(), &[r(4, 3), r(-1, 3)]);
        assert_eq!(m.betas(), &[r(2, 3), r(0, 1), r(0, 1)]);
    }

    #[test]
    fn bdf7_matches_harmonic_sum_and_displayed_magnitudes() {
        let m = bdf_coefficients(7).unwrap();
        assert_eq!(m.beta0(), r(140, 363));
        let shown = [
            r(980, 363),
            r(490, 121),
            r(4900, 1089),
            r(1225, 363),
            r(196, 121),
            r(490, 1089),
            r(20, 363),
        ];
        for (a, s) in m.alphas().iter().zip(shown) {
            assert_eq!(a.abs(), s);
        }
        // alternating signs, starting positive
        for (i, a) in m.alphas().iter().enumerate() {
            assert_eq!(a.is_positive(), i % 2 == 0, "α_{}", i + 1);
        }
    }

    #[test]
    fn bdf_order_range() {
        assert!(matches!(
            bdf_coefficients(0),
            Err(MethodError::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            bdf_coefficients(8),
            Err(MethodError::OrderOutOfRange { .. })
        ));
    }

    #[test]
    fn adams_moulton_special_cases() {
        let euler = adams_moulton_coefficients(0).unwrap();
        assert_eq!(euler.alphas(), &[r(1, 1)]);
        assert_eq!(euler.betas(), &[r(1, 1)]);
        assert_eq!(euler.order(), 1);

        let trap = adams_moulton_coefficients(1).unwrap();
        assert_eq!(trap.alphas(), &[r(1, 1)]);
        assert_eq!(trap.betas(), &[r(1, 2), r(1, 2)]);
        assert_eq!(trap.order(), 2);

        let am3 = adams_moulton_coefficients(2).unwrap();
        assert_eq!(am3.alphas(), &[r(1, 1), r(0, 1)]);
        assert_eq!(am3.betas(), &[r(5, 12), r(8, 12), r(-1, 12)]);
        assert!(adams_moulton_coefficients(6).is_err());
    }

    #[test]
    fn characteristic_polynomials() {
        let (rho, s) = bdf_coefficients(1).unwrap().rho_sigma();
        assert_eq!(rho.coeffs(), &[r(-1, 1), r(1, 1)]);
        assert_eq!(s.coeffs(), &[r(0, 1), r(1, 1)]);

        let (rho, s) = adams_moulton_coefficients(1).unwrap().rho_sigma();
        assert_eq!(rho.coeffs(), &[r(-1, 1), r(1, 1)]);
        assert_eq!(s.coeffs(), &[r(1, 2), r(1, 2)]);

        let (rho, s) = bdf_coefficients(2).unwrap().rho_sigma();
        assert_eq!(rho.coeffs(), &[r(1, 3), r(-4, 3), r(1, 1)]);
        assert_eq!(s.coeffs(), &[r(0, 1), r(0, 1), r(2, 3)]);
        assert_eq!(rho.to_string(), "z^2 - (4/3)z + 1/3");
    }

    #[test]
    fn every_method_is_consistent_and_exact_to_its_order() {
        let all = (1..=7)
            .map(|q| bdf_coefficients(q).unwrap())
            .chain((0..=5).map(|q| adams_moulton_coefficients(q).unwrap()));
        for m in all {
            assert!(m.is_consistent(), "{:?}", m);
            for p in 0..=m.order() {
                assert!(m.monomial_residual(p).is_zero(), "{:?} x^{p}", m);
            }
            assert!(!m.monomial_residual(m.order() + 1).is_zero());
            // the validating constructor accepts what the generators produce
            LinearMultistepMethod::from_coefficients(
                m.family(),
                m.alphas().to_vec(),
                m.betas().to_vec(),
                m.order(),
            )
            .unwrap();
        }
    }

    #[test]
    fn adams_moulton_weights_sum_to_one() {
        for q in 0..=5 {
            let m = adams_moulton_coefficients(q).unwrap();
            assert_eq!(m.betas().iter().sum::<Rational>(), Rational::one());
        }
    }

    #[test]
    fn error_constants() {
        assert_eq!(bdf_coefficients(1).unwrap().error_constant(), r(-1, 2));
        assert_eq!(bdf_coefficients(2).unwrap().error_constant(), r(-2, 9));
        assert_eq!(
            adams_moulton_coefficients(1).unwrap().error_constant(),
            r(-1, 12)
        );
        for q in 1..=6 {
            let m = bdf_coefficients(q).unwrap();
            assert_eq!(
                m.error_constant(),
                -m.beta0() / Rational::from_integer(q as i64 + 1)
            );
        }
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let bad_bdf = LinearMultistepMethod::from_coefficients(
            Family::Bdf,
            vec![r(1, 1)],
            vec![r(1, 2), r(1, 2)],
            2,
        );
        assert!(bad_bdf.is_err());
        let inconsistent = LinearMultistepMethod::from_coefficients(
            Family::Bdf,
            vec![r(1, 2)],
            vec![r(1, 1), r(0, 1)],
            1,
        );
        assert!(inconsistent.is_err());
        let overclaimed = LinearMultistepMethod::from_coefficients(
            Family::Bdf,
            vec![r(1, 1)],
            vec![r(1, 1), r(0, 1)],
            2,
        );
        assert!(overclaimed.is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(bdf_coefficients(6).unwrap(), bdf_coefficients(6).unwrap());
    }
}
