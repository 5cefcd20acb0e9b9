//! Absolute stability of linear multistep methods on `y' = λy`.
//!
//! With `σ = hλ` the method's recurrence has characteristic polynomial
//! `P(z) = ρ(z) - σ·s(z)`. The boundary locus is the image of the unit circle
//! under `σ(θ) = ρ(e^{iθ}) / s(e^{iθ})`: exactly the values of `σ` for which
//! `P` has a root of unit modulus. For BDF methods the stable region is the
//! exterior of that curve.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{polynomial_roots, ComplexPolynomial, LinalgError};
use crate::methods::{to_f64, Family, LinearMultistepMethod};

pub const MIN_LOCUS_SAMPLES: usize = 16;
/// Samples used by [`is_stiffly_stable`] and the abscissa search.
pub const DENSE_SAMPLES: usize = 8192;
const ROOT_TOL: f64 = 1e-9;
const SIMPLE_ROOT_SEPARATION: f64 = 1e-6;
const DENOMINATOR_FLOOR: f64 = 1e-14;
const CLOSURE_TOL: f64 = 1e-12;
const INTERSECTION_TOL: f64 = 1e-8;
const ABSCISSA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("boundary locus needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("s(e^iθ) vanishes at θ = {theta}")]
    DegenerateDenominator { theta: f64 },
    #[error("leading coefficient of P(z) vanishes at σ = {sigma}")]
    DegreeCollapse { sigma: Complex64 },
    #[error("{family} order {order} is not supported here (need {expected})")]
    UnsupportedMethod {
        family: Family,
        order: usize,
        expected: &'static str,
    },
    #[error("eigenvalue {eigenvalue} does not have a negative real part")]
    NotAsymptoticallyStable { eigenvalue: Complex64 },
    #[error("smallest |Re λ| is {min_abs_re:e}; ratio undefined")]
    DegenerateSpectrum { min_abs_re: f64 },
    #[error("no eigenvalues given")]
    EmptySpectrum,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusSample {
    pub theta: f64,
    pub sigma: Complex64,
}

/// Sampled boundary curve in the `hλ` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityLocus {
    method_order: usize,
    family: Family,
    samples: Vec<LocusSample>,
    closed: bool,
    rho: Vec<f64>,
    s: Vec<f64>,
}

impl StabilityLocus {
    pub fn method_order(&self) -> usize {
        self.method_order
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `num_samples + 1` points with `θ` from 0 to 2π inclusive.
    pub fn samples(&self) -> &[LocusSample] {
        &self.samples
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    /// Evaluates the curve at an arbitrary angle.
    pub fn sigma_at(&self, theta: f64) -> Complex64 {
        ratio(&self.rho, &self.s, Complex64::from_polar(1.0, theta))
    }

    /// Smallest real part over the sampled points.
    pub fn min_re(&self) -> f64 {
        self.samples
            .iter()
            .map(|p| p.sigma.re)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Result of the stiff-stability check for a BDF method.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffStabilityReport {
    /// Stiff-stability abscissa; `NaN` when `delta_defined` is false.
    pub delta: f64,
    pub delta_defined: bool,
    pub stiffly_stable: bool,
    pub self_intersections: Vec<Complex64>,
}

fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

fn ratio(rho: &[f64], s: &[f64], z: Complex64) -> Complex64 {
    horner(rho, z) / horner(s, z)
}

/// Uniform angles `2πk/n`, `k = 0..=n`, with the matching points on the unit
/// circle. The upper half is mirrored from the lower so the locus of a real
/// method is exactly conjugate-symmetric.
fn unit_circle(n: usize) -> Vec<(f64, Complex64)> {
    let mut pts: Vec<(f64, Complex64)> = (0..=n)
        .map(|k| {
            let theta = if k == n {
                TAU
            } else {
                TAU * k as f64 / n as f64
            };
            (theta, Complex64::new(0.0, 0.0))
        })
        .collect();
    for k in 0..=n {
        pts[k].1 = if 2 * k == n {
            Complex64::new(-1.0, 0.0)
        } else if 2 * k < n {
            Complex64::from_polar(1.0, pts[k].0)
        } else {
            pts[n - k].1.conj()
        };
    }
    pts
}

/// Boundary locus `σ(θ) = ρ(e^{iθ}) / s(e^{iθ})` at `num_samples + 1` angles
/// spanning `[0, 2π]`.
pub fn boundary_locus(
    method: &LinearMultistepMethod,
    num_samples: usize,
) -> Result<StabilityLocus, StabilityError> {
    if num_samples < MIN_LOCUS_SAMPLES {
        return Err(StabilityError::TooFewSamples {
            min: MIN_LOCUS_SAMPLES,
            got: num_samples,
        });
    }
    let (rho, s) = method.rho_sigma();
    let rho = rho.to_f64();
    let s = s.to_f64();
    let samples = unit_circle(num_samples)
        .into_iter()
        .map(|(theta, z)| {
            let den = horner(&s, z);
            if den.norm() < DENOMINATOR_FLOOR {
                return Err(StabilityError::DegenerateDenominator { theta });
            }
            Ok(LocusSample {
                theta,
                sigma: horner(&rho, z) / den,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let first = samples[0].sigma;
    let last = samples[num_samples].sigma;
    Ok(StabilityLocus {
        method_order: method.order(),
        family: method.family(),
        closed: (first - last).norm() < CLOSURE_TOL,
        samples,
        rho,
        s,
    })
}

/// Single point `σ(θ)` of the boundary locus.
pub fn locus_point(
    method: &LinearMultistepMethod,
    theta: f64,
) -> Result<Complex64, StabilityError> {
    let (rho, s) = method.rho_sigma();
    let z = Complex64::from_polar(1.0, theta);
    let den = s.eval_complex(z);
    if den.norm() < DENOMINATOR_FLOOR {
        return Err(StabilityError::DegenerateDenominator { theta });
    }
    Ok(rho.eval_complex(z) / den)
}

/// `P(z) = ρ(z) - σ·s(z)`.
pub fn characteristic_polynomial(
    method: &LinearMultistepMethod,
    sigma: Complex64,
) -> ComplexPolynomial {
    let (rho, s) = method.rho_sigma();
    let mut s = s.coeffs().to_vec();
    s.resize(rho.coeffs().len(), Default::default());
    ComplexPolynomial::new(
        rho.coeffs()
            .iter()
            .zip(&s)
            .map(|(r, sc)| Complex64::new(to_f64(r), 0.0) - sigma * to_f64(sc))
            .collect(),
    )
}

/// Root condition at `σ`: every root of `P` inside the unit disk, roots on
/// the circle (within `1e-9`) allowed only when simple (no other root within
/// `1e-6`).
pub fn is_absolutely_stable(
    method: &LinearMultistepMethod,
    sigma: Complex64,
) -> Result<bool, StabilityError> {
    let lead = Complex64::new(1.0, 0.0) - sigma * to_f64(&method.beta0());
    if lead.norm() < DENOMINATOR_FLOOR {
        return Err(StabilityError::DegreeCollapse { sigma });
    }
    let roots = polynomial_roots(&characteristic_polynomial(method, sigma))?;
    Ok(satisfies_root_condition(&roots))
}

fn satisfies_root_condition(roots: &[Complex64]) -> bool {
    roots.iter().enumerate().all(|(i, z)| {
        let r = z.norm();
        if r < 1.0 - ROOT_TOL {
            true
        } else if r <= 1.0 + ROOT_TOL {
            roots
                .iter()
                .enumerate()
                .all(|(j, w)| i == j || (z - w).norm() > SIMPLE_ROOT_SEPARATION)
        } else {
            false
        }
    })
}

fn require_bdf(
    method: &LinearMultistepMethod,
    max_order: usize,
    expected: &'static str,
) -> Result<(), StabilityError> {
    if method.family() != Family::Bdf || method.order() > max_order {
        return Err(StabilityError::UnsupportedMethod {
            family: method.family(),
            order: method.order(),
            expected,
        });
    }
    Ok(())
}

/// Stiff-stability abscissa `δ = min_θ Re σ(θ)`.
///
/// Dense sampling locates every local minimum of `Re σ`; each is refined by
/// golden-section search over the neighbouring sample interval.
pub fn stiff_stability_abscissa(method: &LinearMultistepMethod) -> Result<f64, StabilityError> {
    require_bdf(method, 6, "BDF order 1..=6")?;
    let locus = boundary_locus(method, DENSE_SAMPLES)?;
    Ok(min_real_part(&locus))
}

fn min_real_part(locus: &StabilityLocus) -> f64 {
    let pts = locus.samples();
    // the last sample repeats the first
    let n = pts.len() - 1;
    let re = |k: usize| pts[k % n].sigma.re;
    let mut best = locus.min_re();
    for k in 0..n {
        let prev = re(k + n - 1);
        let here = re(k);
        let next = re(k + 1);
        if here <= prev && here <= next {
            let step = TAU / n as f64;
            let center = pts[k].theta;
            let (_, value) = golden_section_min(
                |t| locus.sigma_at(t).re,
                center - step,
                center + step,
                ABSCISSA_TOL,
            );
            best = best.min(value).min(here);
        }
    }
    let delta = best.min(0.0);
    if delta.abs() < 1e-12 {
        0.0
    } else {
        delta
    }
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Points where non-adjacent segments of the sampled locus cross, refined by
/// bisecting both parameter intervals down to `1e-8`. The closure point
/// `θ = 0 ≡ 2π` is not reported. Crossings closer than `1e-6` are merged.
pub fn find_self_intersections(locus: &StabilityLocus) -> Vec<Complex64> {
    let pts = locus.samples();
    let nseg = pts.len() - 1;
    let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.sigma.re, p.sigma.im)).collect();
    let bbox = |i: usize| {
        let (a, b) = (xy[i], xy[i + 1]);
        (a.0.min(b.0), a.0.max(b.0), a.1.min(b.1), a.1.max(b.1))
    };
    let boxes: Vec<_> = (0..nseg).map(bbox).collect();
    let mut order: Vec<usize> = (0..nseg).collect();
    order.sort_by(|&a, &b| boxes[a].0.total_cmp(&boxes[b].0).then(a.cmp(&b)));

    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let bi = boxes[i];
        for &j in &order[pos + 1..] {
            let bj = boxes[j];
            if bj.0 > bi.1 {
                break;
            }
            if bj.3 < bi.2 || bj.2 > bi.3 {
                continue;
            }
            let (lo, hi) = (i.min(j), i.max(j));
            let adjacent = hi - lo <= 1 || (locus.closed && lo == 0 && hi == nseg - 1);
            if adjacent {
                continue;
            }
            if chord_crossing(xy[lo], xy[lo + 1], xy[hi], xy[hi + 1]).is_some() {
                pairs.push((lo, hi));
            }
        }
    }
    pairs.sort_unstable();

    let mut found: Vec<Complex64> = Vec::new();
    for (i, j) in pairs {
        let p = refine_crossing(
            locus,
            (pts[i].theta, pts[i + 1].theta),
            (pts[j].theta, pts[j + 1].theta),
        );
        if !found.iter().any(|q| (q - p).norm() < 1e-6) {
            found.push(p);
        }
    }
    found
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Intersection point of segments `ab` and `cd`, if they meet.
fn chord_crossing(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    d: (f64, f64),
) -> Option<(f64, f64)> {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if d1 == 0.0 && d2 == 0.0 {
        // collinear overlap carries no transversal crossing
        return None;
    }
    if d1 * d2 > 0.0 || d3 * d4 > 0.0 {
        return None;
    }
    let t = d1 / (d1 - d2);
    Some((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)))
}

fn refine_crossing(locus: &StabilityLocus, mut s: (f64, f64), mut t: (f64, f64)) -> Complex64 {
    let at = |theta: f64| {
        let z = locus.sigma_at(theta);
        (z.re, z.im)
    };
    let chord = |s: (f64, f64), t: (f64, f64)| chord_crossing(at(s.0), at(s.1), at(t.0), at(t.1));
    let mut best = chord(s, t).unwrap_or_else(|| at(s.0));
    for _ in 0..200 {
        if s.1 - s.0 < INTERSECTION_TOL && t.1 - t.0 < INTERSECTION_TOL {
            break;
        }
        let split = |iv: (f64, f64)| {
            if iv.1 - iv.0 < INTERSECTION_TOL {
                vec![iv]
            } else {
                let m = 0.5 * (iv.0 + iv.1);
                vec![(iv.0, m), (m, iv.1)]
            }
        };
        let next = split(s)
            .into_iter()
            .flat_map(|a| split(t).into_iter().map(move |b| (a, b)))
            .find_map(|(a, b)| chord(a, b).map(|p| (a, b, p)));
        match next {
            Some((a, b, p)) => {
                s = a;
                t = b;
                best = p;
            }
            None => break,
        }
    }
    Complex64::new(best.0, best.1)
}

/// Stiff-stability verdict for BDF orders 1..=7.
///
/// Stiffly stable means the locus is a simple closed curve and the root
/// condition holds at the probes `δ-1`, `δ-10`, `δ-100` and `-10^6` on the
/// negative real axis. The probes sample the half-plane left of `δ`; they do
/// not cover it.
pub fn is_stiffly_stable(
    method: &LinearMultistepMethod,
) -> Result<StiffStabilityReport, StabilityError> {
    require_bdf(method, 7, "BDF order 1..=7")?;
    let locus = boundary_locus(method, DENSE_SAMPLES)?;
    let self_intersections = find_self_intersections(&locus);
    let delta_defined = method.order() <= 6;
    let delta = if delta_defined {
        min_real_part(&locus)
    } else {
        f64::NAN
    };
    let mut stiffly_stable = delta_defined && self_intersections.is_empty();
    if stiffly_stable {
        for probe in [delta - 1.0, delta - 10.0, delta - 100.0, -1e6] {
            if !is_absolutely_stable(method, Complex64::new(probe, 0.0))? {
                stiffly_stable = false;
                break;
            }
        }
    }
    Ok(StiffStabilityReport {
        delta,
        delta_defined,
        stiffly_stable,
        self_intersections,
    })
}

/// `max |Re λ| / min |Re λ|` over an asymptotically stable spectrum.
pub fn stiffness_ratio(eigenvalues: &[Complex64]) -> Result<f64, StabilityError> {
    if eigenvalues.is_empty() {
        return Err(StabilityError::EmptySpectrum);
    }
    if let Some(bad) = eigenvalues.iter().find(|l| !(l.re < 0.0)) {
        return Err(StabilityError::NotAsymptoticallyStable { eigenvalue: *bad });
    }
    let (lo, hi) = eigenvalues
        .iter()
        .map(|l| l.re.abs())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo < 1e-300 {
        return Err(StabilityError::DegenerateSpectrum { min_abs_re: lo });
    }
    Ok(hi / lo)
}
