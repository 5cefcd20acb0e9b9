use num_complex::Complex64;
use proptest::prelude::*;
use stiffode::linalg::{eigenvalues, lu_solve, polynomial_roots};
use stiffode::methods::bdf_coefficients;
use stiffode::stability::{boundary_locus, is_absolutely_stable, stiff_stability_abscissa};
use stiffode::{ComplexPolynomial, DenseMatrix};

fn complex_in_disk() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

/// Greedy nearest matching; returns the worst distance.
fn match_distance(mut found: Vec<Complex64>, expected: &[Complex64]) -> f64 {
    let mut worst: f64 = 0.0;
    for e in expected {
        let (i, d) = found
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (z - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("same count");
        worst = worst.max(d);
        found.swap_remove(i);
    }
    worst
}

fn min_separation(roots: &[Complex64]) -> f64 {
    let mut sep = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            sep = sep.min((roots[i] - roots[j]).norm());
        }
    }
    sep
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roots_reconstruct_polynomial(roots in prop::collection::vec(complex_in_disk(), 1..=8)) {
        prop_assume!(min_separation(&roots) > 0.05);
        let p = ComplexPolynomial::from_roots(&roots);
        let found = polynomial_roots(&p).unwrap();
        prop_assert_eq!(found.len(), roots.len());
        let d = match_distance(found, &roots);
        prop_assert!(d < 1e-6, "worst root error {}", d);
    }
}

fn random_matrix(n: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-5.0f64..5.0, n * n)
        .prop_map(move |data| DenseMatrix::new(n, n, data).unwrap())
}

fn spectrum_matches(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    a.len() == b.len() && match_distance(a.to_vec(), b) < tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigenvalues_invariant_under_permutation_similarity(
        a in random_matrix(4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let n = 4;
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = a[(perm[i], perm[j])];
            }
        }
        let b = DenseMatrix::new(n, n, b).unwrap();
        let ea = eigenvalues(&a).unwrap();
        let eb = eigenvalues(&b).unwrap();
        prop_assume!(min_separation(&ea) > 1e-3);
        prop_assert!(spectrum_matches(&ea, &eb, 1e-7), "{:?} vs {:?}", ea, eb);
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let sum: Complex64 = ea.iter().sum();
        prop_assert!((sum.re - trace).abs() < 1e-9 * (1.0 + trace.abs()));
        prop_assert!(sum.im.abs() < 1e-9);
    }

    #[test]
    fn upper_triangular_eigenvalues_are_the_diagonal(
        diag in prop::collection::vec(-10.0f64..10.0, 1..=6),
        upper in prop::collection::vec(-3.0f64..3.0, 36),
    ) {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = diag[i];
            for j in i + 1..n {
                data[i * n + j] = upper[i * 6 + j];
            }
        }
        let a = DenseMatrix::new(n, n, data).unwrap();
        let expected: Vec<Complex64> = diag.iter().map(|&d| Complex64::new(d, 0.0)).collect();
        prop_assume!(min_separation(&expected) > 1e-2);
        let found = eigenvalues(&a).unwrap();
        prop_assert!(spectrum_matches(&found, &expected, 1e-8), "{:?}", found);
    }

    #[test]
    fn lu_round_trip(a in random_matrix(5), x in prop::collection::vec(-10.0f64..10.0, 5)) {
        let b = a.mul_vec(&x);
        match lu_solve(&a, &b) {
            Ok(sol) => {
                let r = a.mul_vec(&sol);
                for (ri, bi) in r.iter().zip(&b) {
                    prop_assert!((ri - bi).abs() < 1e-9 * (1.0 + bi.abs()));
                }
            }
            Err(stiffode::LinalgError::Singular { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn bdf_exterior_far_left_is_stable(
        order in 1usize..=6,
        re in -1e4f64..-7.0,
        im in -50.0f64..50.0,
    ) {
        // every BDF1..6 locus lies inside Re σ > -7 and |σ| < 40
        let m = bdf_coefficients(order).unwrap();
        let sigma = Complex64::new(re, im);
        prop_assume!(sigma.norm() > 40.0 || re < -7.0);
        prop_assert!(is_absolutely_stable(&m, sigma).unwrap());
    }
}

#[test]
fn locus_is_conjugate_symmetric() {
    for order in 1..=7 {
        let locus = boundary_locus(&bdf_coefficients(order).unwrap(), 1024).unwrap();
        let s = locus.samples();
        let n = s.len() - 1;
        for k in 0..=n {
            assert_eq!(
                s[k].sigma,
                s[n - k].sigma.conj(),
                "order {order} sample {k}"
            );
        }
    }
}

#[test]
fn delta_decreases_with_order() {
    let deltas: Vec<f64> = (1..=6)
        .map(|q| stiff_stability_abscissa(&bdf_coefficients(q).unwrap()).unwrap())
        .collect();
    for w in deltas.windows(2) {
        assert!(w[1] <= w[0], "{deltas:?}");
    }
    assert!(deltas.iter().all(|d| *d <= 0.0));
}

#[test]
fn small_positive_real_axis_is_unstable() {
    for order in 1..=6 {
        let m = bdf_coefficients(order).unwrap();
        for re in [0.05, 0.2, 0.5] {
            assert!(
                !is_absolutely_stable(&m, Complex64::new(re, 0.0)).unwrap(),
                "order {order} at {re}"
            );
        }
    }
}
