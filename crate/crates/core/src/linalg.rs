//! Small dense linear algebra.
//!
//! Only what the integrators and the stability analysis need: LU with partial
//! pivoting, Aberth-Ehrlich polynomial roots, and real nonsymmetric
//! eigenvalues via balancing, Hessenberg reduction and Francis double-shift QR.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::{Complex64, ComplexFloat};
use thiserror::Error;

pub const MAX_LU_DIM: usize = 256;
pub const MAX_EIGEN_DIM: usize = 32;
pub const MAX_ROOT_DEGREE: usize = 16;
const ROOT_MAX_ITERS: usize = 500;
const ROOT_RESIDUAL_TOL: f64 = 1e-12;
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;
const POLY_TRIM: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {dim} exceeds the limit of {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("polynomial degree {degree} outside 1..={max}")]
    BadDegree { degree: usize, max: usize },
    #[error("root finder did not converge after {iterations} iterations")]
    RootsNotConverged {
        iterations: usize,
        best: Vec<Complex64>,
    },
    #[error("QR iteration did not converge after {iterations} iterations")]
    EigenNotConverged { iterations: usize },
    #[error("eigenvalues {a} and {b} are not separated; matrix may be defective")]
    ClusteredEigenvalues { a: Complex64, b: Complex64 },
}

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length must match columns");
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        if self.cols == 0 {
            return 0.0;
        }
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn require_square(&self, max: usize) -> Result<usize, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if self.rows > max {
            return Err(LinalgError::TooLarge {
                dim: self.rows,
                max,
            });
        }
        Ok(self.rows)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Row-major complex matrix. Holds eigenvector bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Solves `self · x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let norm = self
            .data
            .chunks_exact(self.cols.max(1))
            .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let lu = LuFactors::factor(
            self.rows,
            self.data.clone(),
            PivotPolicy::Strict(SINGULAR_PIVOT_RATIO * norm),
        )?;
        lu.solve(b)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy)]
enum PivotPolicy {
    /// Fail when a pivot magnitude drops to the threshold or below.
    Strict(f64),
    /// Replace tiny pivots by the given magnitude (inverse iteration).
    Regularize(f64),
}

/// Packed LU factorisation with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl LuFactors<f64> {
    /// Factors a square real matrix; fails when a pivot falls below
    /// `1e-13·‖A‖∞`.
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let n = a.require_square(MAX_LU_DIM)?;
        let threshold = SINGULAR_PIVOT_RATIO * a.norm_inf();
        Self::factor(n, a.data.clone(), PivotPolicy::Strict(threshold))
    }
}

impl<T> LuFactors<T>
where
    T: ComplexFloat<Real = f64>,
{
    fn factor(n: usize, mut lu: Vec<T>, policy: PivotPolicy) -> Result<Self, LinalgError> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, mag) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            match policy {
                PivotPolicy::Strict(threshold) => {
                    if !(mag > threshold) {
                        return Err(LinalgError::Singular {
                            column: k,
                            pivot: mag,
                        });
                    }
                }
                PivotPolicy::Regularize(floor) => {
                    if mag < floor {
                        lu[k * n + k] = T::from(floor).expect("real fits in scalar");
                    }
                }
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] = lu[i * n + j] - factor * u;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// Solves `A·x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
        });
    }
    LuFactors::new(a)?.solve(b)
}

/// Polynomial with complex coefficients in ascending degree. Trailing
/// coefficients below `1e-14` in magnitude are trimmed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPolynomial {
    coeffs: Vec<Complex64>,
}

impl ComplexPolynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() < POLY_TRIM) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            coeffs = next;
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().expect("never empty")
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `(p(z), p'(z), Σ|a_i||z|^i)`.
    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64, f64) {
        let zero = Complex64::new(0.0, 0.0);
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold((zero, zero, 0.0), |(p, dp, scale), c| {
                (p * z + c, dp * z + p, scale * r + c.norm())
            })
    }
}

impl fmt::Display for ComplexPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| format!("({c})z^{i}"))
            .collect();
        f.write_str(&terms.join(" + "))
    }
}

/// All roots of `p`, with multiplicity, by Aberth-Ehrlich simultaneous
/// iteration.
///
/// Initial guesses sit on a circle whose radius is the Cauchy bound, rotated
/// off the real axis so conjugate pairs separate. A root is accepted once
/// `|p(z)| / Σ|a_i||z|^i < 1e-12`; after every root passes, a few polishing
/// sweeps continue while they still reduce `|p(z)|`.
pub fn polynomial_roots(p: &ComplexPolynomial) -> Result<Vec<Complex64>, LinalgError> {
    let degree = p.degree();
    if !(1..=MAX_ROOT_DEGREE).contains(&degree) {
        return Err(LinalgError::BadDegree {
            degree,
            max: MAX_ROOT_DEGREE,
        });
    }
    if p.coeffs
        .iter()
        .any(|c| !c.re.is_finite() || !c.im.is_finite())
    {
        return Err(LinalgError::NonFinite);
    }

    // Exact zero roots deflate off the bottom; the relative residual test
    // cannot certify them.
    let zero = Complex64::new(0.0, 0.0);
    let lead_zeros = p.coeffs.iter().take_while(|c| **c == zero).count();
    let mut roots = vec![zero; lead_zeros];
    let lead = p.leading();
    let monic = ComplexPolynomial {
        coeffs: p.coeffs[lead_zeros..].iter().map(|c| c / lead).collect(),
    };
    let n = monic.degree();
    if n == 0 {
        return Ok(roots);
    }
    if n == 1 {
        roots.push(-monic.coeffs[0]);
        return Ok(roots);
    }

    let radius = 1.0
        + monic.coeffs[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();
    let mut done = vec![false; n];

    let mut iterations = 0;
    while done.iter().any(|d| !d) {
        if iterations == ROOT_MAX_ITERS {
            return Err(LinalgError::RootsNotConverged {
                iterations,
                best: z,
            });
        }
        iterations += 1;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (pz, dpz, scale) = monic.eval_with_derivative(z[k]);
            if pz.norm() <= ROOT_RESIDUAL_TOL * scale {
                done[k] = true;
                continue;
            }
            let dz = aberth_correction(&z, k, pz, dpz);
            z[k] -= dz;
        }
    }

    for _ in 0..50 {
        let mut improved = false;
        for k in 0..n {
            let (pz, dpz, _) = monic.eval_with_derivative(z[k]);
            if pz == zero {
                continue;
            }
            let candidate = z[k] - aberth_correction(&z, k, pz, dpz);
            if candidate.re.is_finite()
                && candidate.im.is_finite()
                && monic.eval(candidate).norm() < pz.norm()
            {
                z[k] = candidate;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    roots.extend(z);
    Ok(roots)
}

fn aberth_correction(z: &[Complex64], k: usize, pz: Complex64, dpz: Complex64) -> Complex64 {
    let repulsion: Complex64 = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, zj)| {
            let d = z[k] - zj;
            if d.norm() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                d.inv()
            }
        })
        .sum();
    if dpz.norm() == 0.0 {
        // nudge off a critical point
        return Complex64::new(1e-8 * (1.0 + z[k].norm()), 1e-8);
    }
    let newton = pz / dpz;
    let w = newton / (Complex64::new(1.0, 0.0) - newton * repulsion);
    if w.re.is_finite() && w.im.is_finite() {
        w
    } else {
        newton
    }
}

/// All eigenvalues of a real square matrix, with multiplicity.
pub fn eigenvalues(a: &DenseMatrix) -> Result<Vec<Complex64>, LinalgError> {
    let n = a.require_square(MAX_EIGEN_DIM)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.data.clone();
    balance(n, &mut h);
    to_hessenberg(n, &mut h);
    hessenberg_qr(n, &mut h)
}

/// Parlett-Reinsch balancing by powers of two; similarity-preserving.
fn balance(n: usize, a: &mut [f64]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i * n + j] *= g;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
    }
}

/// Reduction to upper Hessenberg form by stabilised elementary similarity
/// transforms. Entries below the subdiagonal are zeroed.
fn to_hessenberg(n: usize, a: &mut [f64]) {
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0;
        let mut i = m;
        for j in m..n {
            if a[j * n + m - 1].abs() > x.abs() {
                x = a[j * n + m - 1];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..n {
                a.swap(i * n + j, m * n + j);
            }
            for j in 0..n {
                a.swap(j * n + i, j * n + m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let mut y = a[i * n + m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i * n + m - 1] = 0.0;
                    for j in m..n {
                        a[i * n + j] -= y * a[m * n + j];
                    }
                    for j in 0..n {
                        a[j * n + m] += y * a[j * n + i];
                    }
                }
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroys `a`).
fn hessenberg_qr(n: usize, a: &mut [f64]) -> Result<Vec<Complex64>, LinalgError> {
    let eps = f64::EPSILON;
    let idx = |i: usize, j: usize| i * n + j;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[idx(i, j)].abs();
        }
    }
    let max_total = 100 * n;
    let mut total = 0usize;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nu = nn as usize;
            // look for a single small subdiagonal element
            let mut l = nu;
            while l > 0 {
                let mut s = a[idx(l - 1, l - 1)].abs() + a[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[idx(l, l - 1)].abs() <= eps * s {
                    a[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[idx(nu, nu)];
            if l == nu {
                out[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = a[idx(nu - 1, nu - 1)];
            let mut w = a[idx(nu, nu - 1)] * a[idx(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    out[nu - 1] = Complex64::new(x + z, 0.0);
                    out[nu] = out[nu - 1];
                    if z != 0.0 {
                        out[nu] = Complex64::new(x - w / z, 0.0);
                    }
                } else {
                    out[nu] = Complex64::new(x + p, -z);
                    out[nu - 1] = out[nu].conj();
                }
                nn -= 2;
                break;
            }
            if total >= max_total {
                return Err(LinalgError::EigenNotConverged { iterations: total });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    a[idx(i, i)] -= x;
                }
                let s = a[idx(nu, nu - 1)].abs() + a[idx(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            total += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[idx(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[idx(m + 1, m)] + a[idx(m, m + 1)];
                q = a[idx(m + 1, m + 1)] - z - rr - ss;
                r = a[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v =
                    p.abs() * (a[idx(m - 1, m - 1)].abs() + z.abs() + a[idx(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[idx(i + 2, i)] = 0.0;
                if i != m {
                    a[idx(i + 2, i - 1)] = 0.0;
                }
            }
            // double QR step on rows l..nn and columns m..nn
            for k in m..nu {
                if k != m {
                    p = a[idx(k, k - 1)];
                    q = a[idx(k + 1, k - 1)];
                    r = 0.0;
                    if k + 1 != nu {
                        r = a[idx(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[idx(k, k - 1)] = -a[idx(k, k - 1)];
                    }
                } else {
                    a[idx(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[idx(k, j)] + q * a[idx(k + 1, j)];
                    if k + 1 != nu {
                        pp += r * a[idx(k + 2, j)];
                        a[idx(k + 2, j)] -= pp * z;
                    }
                    a[idx(k + 1, j)] -= pp * y;
                    a[idx(k, j)] -= pp * x;
                }
                let mmin = nu.min(k + 3);
                for i in l..=mmin {
                    let mut pp = x * a[idx(i, k)] + y * a[idx(i, k + 1)];
                    if k + 1 != nu {
                        pp += z * a[idx(i, k + 2)];
                        a[idx(i, k + 2)] -= pp * r;
                    }
                    a[idx(i, k + 1)] -= pp * q;
                    a[idx(i, k)] -= pp;
                }
            }
        }
    }
    Ok(out)
}

/// Eigenvalues and unit eigenvectors of a diagonalisable matrix with
/// well-separated eigenvalues. Column `i` of the returned matrix pairs with
/// `lambdas[i]`.
pub fn eigendecompose(a: &DenseMatrix) -> Result<(ComplexMatrix, Vec<Complex64>), LinalgError> {
    let n = a.require_square(MAX_EIGEN_DIM)?;
    let lambdas = eigenvalues(a)?;
    let norm = a.norm_inf();
    let separation = 1e-8 * norm;
    for i in 0..n {
        for j in i + 1..n {
            if (lambdas[i] - lambdas[j]).norm() <= separation {
                return Err(LinalgError::ClusteredEigenvalues {
                    a: lambdas[i],
                    b: lambdas[j],
                });
            }
        }
    }

    let scale = norm.max(f64::MIN_POSITIVE);
    let mut t = ComplexMatrix::zeros(n, n);
    for (col, &lambda) in lambdas.iter().enumerate() {
        let v = inverse_iteration(a, lambda, scale);
        let residual = eigen_residual(a, lambda, &v);
        if residual > 1e-8 * scale {
            return Err(LinalgError::ClusteredEigenvalues {
                a: lambda,
                b: lambda,
            });
        }
        for (row, value) in v.into_iter().enumerate() {
            t[(row, col)] = value;
        }
    }
    Ok((t, lambdas))
}

fn inverse_iteration(a: &DenseMatrix, lambda: Complex64, scale: f64) -> Vec<Complex64> {
    let n = a.rows();
    let shift = lambda + Complex64::new(scale * 1e-12, 0.0);
    let mut shifted: Vec<Complex64> = a.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for i in 0..n {
        shifted[i * n + i] -= shift;
    }
    let lu = LuFactors::factor(n, shifted, PivotPolicy::Regularize(f64::EPSILON * scale))
        .expect("regularised factorisation cannot fail");
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.0))
        .collect();
    normalize(&mut v);
    for _ in 0..3 {
        v = lu.solve(&v).expect("dimension matches");
        normalize(&mut v);
    }
    // fix the phase so the largest component is real and positive
    if let Some(big) = v
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
    {
        let phase = big.conj() / big.norm();
        for c in &mut v {
            *c *= phase;
        }
    }
    v
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for c in v.iter_mut() {
            *c /= norm;
        }
    }
}

/// `‖A·v - λ·v‖₂`.
pub fn eigen_residual(a: &DenseMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = a.rows();
    (0..n)
        .map(|i| {
            let av: Complex64 = (0..n).map(|j| v[j] * a[(i, j)]).sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn lu_examples() {
        let id = DenseMatrix::identity(2);
        assert_eq!(lu_solve(&id, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let d = DenseMatrix::diag(&[2.0, 4.0]);
        assert_eq!(lu_solve(&d, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let x = lu_solve(&m, &[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn lu_rejects_singular_and_oversized() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            lu_solve(&m, &[1.0, 1.0]),
            Err(LinalgError::Singular { .. })
        ));
        let big = DenseMatrix::identity(257);
        assert!(matches!(
            lu_solve(&big, &vec![0.0; 257]),
            Err(LinalgError::TooLarge { .. })
        ));
        let rect = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            LuFactors::new(&rect),
            Err(LinalgError::NotSquare { .. })
        ));
    }

    #[test]
    fn dense_matrix_rejects_non_finite() {
        assert_eq!(
            DenseMatrix::new(1, 1, vec![f64::NAN]),
            Err(LinalgError::NonFinite)
        );
    }

    #[test]
    fn roots_of_small_polynomials() {
        let p = ComplexPolynomial::from_real(&[-1.0, 0.0, 1.0]);
        let r = sorted(polynomial_roots(&p).unwrap());
        assert_abs_diff_eq!(r[0].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].re, 1.0, epsilon = 1e-12);

        let p = ComplexPolynomial::from_real(&[2.0, 3.0, 1.0]);
        let r = sorted(polynomial_roots(&p).unwrap());
        assert_abs_diff_eq!(r[0].re, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].re, -1.0, epsilon = 1e-12);
        assert!(r.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn triple_root_cluster() {
        // (z - 0.5)^3 = z^3 - 1.5 z^2 + 0.75 z - 0.125
        let p = ComplexPolynomial::from_real(&[-0.125, 0.75, -1.5, 1.0]);
        let r = polynomial_roots(&p).unwrap();
        assert_eq!(r.len(), 3);
        for z in r {
            assert!((z - c(0.5, 0.0)).norm() < 1e-4, "{z}");
        }
    }

    #[test]
    fn zero_roots_and_linear() {
        let p = ComplexPolynomial::from_real(&[0.0, 0.0, -2.0, 1.0]);
        let r = sorted(polynomial_roots(&p).unwrap());
        assert_eq!(r.len(), 3);
        assert_eq!(r[0], c(0.0, 0.0));
        assert_abs_diff_eq!(r[2].re, 2.0, epsilon = 1e-14);

        let p = ComplexPolynomial::new(vec![c(1.0, 1.0), c(2.0, 0.0)]);
        assert_eq!(polynomial_roots(&p).unwrap(), vec![c(-0.5, -0.5)]);
    }

    #[test]
    fn roots_reject_bad_degree() {
        let constant = ComplexPolynomial::from_real(&[3.0]);
        assert!(matches!(
            polynomial_roots(&constant),
            Err(LinalgError::BadDegree { .. })
        ));
        let trimmed = ComplexPolynomial::from_real(&[1.0, 1.0, 1e-16]);
        assert_eq!(trimmed.degree(), 1);
    }

    #[test]
    fn double_root_on_unit_circle_is_resolved_tightly() {
        // (z - 1)^2 (z - 0.3)
        let p = ComplexPolynomial::from_roots(&[c(1.0, 0.0), c(1.0, 0.0), c(0.3, 0.0)]);
        let r = sorted(polynomial_roots(&p).unwrap());
        assert!((r[1] - r[2]).norm() < 1e-6, "{:?}", r);
    }

    #[test]
    fn eigenvalue_examples() {
        let d = DenseMatrix::diag(&[-1000.0, -1.0]);
        let e = sorted(eigenvalues(&d).unwrap());
        assert_eq!(e, vec![c(-1000.0, 0.0), c(-1.0, 0.0)]);

        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap();
        let e = sorted(eigenvalues(&m).unwrap());
        assert_abs_diff_eq!(e[0].re, -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].re, -1.0, epsilon = 1e-12);

        let rot = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let e = sorted(eigenvalues(&rot).unwrap());
        assert_abs_diff_eq!(e[0].im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1].im, 1.0, epsilon = 1e-12);
        assert!(e.iter().all(|z| z.re.abs() < 1e-12));
    }

    #[test]
    fn eigenvalues_of_companion_matrix_match_roots() {
        // companion of z^5 - 15 z^4 + 85 z^3 - 225 z^2 + 274 z - 120 = Π(z - k)
        let coeffs = [-120.0, 274.0, -225.0, 85.0, -15.0];
        let n = coeffs.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for (i, c) in coeffs.iter().enumerate() {
            m[(i, n - 1)] = -c;
        }
        let e = sorted(eigenvalues(&m).unwrap());
        for (k, z) in e.iter().enumerate() {
            assert_abs_diff_eq!(z.re, k as f64 + 1.0, epsilon = 1e-8);
            assert!(z.im.abs() < 1e-8);
        }
    }

    #[test]
    fn eigendecompose_examples() {
        let (t, l) = eigendecompose(&DenseMatrix::diag(&[-2.0, -1.0])).unwrap();
        let l = l.iter().map(|z| z.re).collect::<Vec<_>>();
        assert!(l.contains(&-2.0) && l.contains(&-1.0));
        for j in 0..2 {
            let col = t.column(j);
            let nonzero = col.iter().filter(|v| v.norm() > 1e-12).count();
            assert_eq!(nonzero, 1);
        }

        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]).unwrap();
        let (t, l) = eigendecompose(&m).unwrap();
        for (j, &lambda) in l.iter().enumerate() {
            assert!(eigen_residual(&m, lambda, &t.column(j)) < 1e-8 * m.norm_inf());
        }

        let jordan = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            eigendecompose(&jordan),
            Err(LinalgError::ClusteredEigenvalues { .. })
        ));
    }

    #[test]
    fn complex_eigenvectors() {
        let m = DenseMatrix::from_rows(&[
            vec![-1.0, 5.0, 0.0],
            vec![-5.0, -1.0, 0.0],
            vec![0.0, 0.0, -3.0],
        ])
        .unwrap();
        let (t, l) = eigendecompose(&m).unwrap();
        for (j, &lambda) in l.iter().enumerate() {
            assert!(eigen_residual(&m, lambda, &t.column(j)) < 1e-10);
        }
        let x = t.solve(&[c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let back = t.mul_vec(&x);
        assert!((back[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((back[2] - c(2.0, 0.0)).norm() < 1e-12);
    }
}
