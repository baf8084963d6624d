use carflow::fock::{create_op, second_quantize};
use carflow::linalg::{self, Matrix};
use carflow::quasifree::{car_check, quasifree_moment, Covariance, QuasiFreeRep};
use carflow::sparse::{anticommutator, inner, SparseOperator, Vector};
use carflow::{Complex64, ModeSpace};
use proptest::prelude::*;

fn complex_vec(n: usize) -> impl Strategy<Value = Vector<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| Vector::from_iterator(v.len(), v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

fn complex_matrix(n: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| Matrix::from_iterator(n, n, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

/// Rescales to operator norm `0.95` (or leaves zero alone).
fn contraction(m: Matrix<f64>) -> Matrix<f64> {
    let s = linalg::largest_singular_value(&m);
    if s == 0.0 {
        m
    } else {
        m.unscale(s / 0.95)
    }
}

fn lambdas(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.95, n).prop_filter("no half", |v| v.iter().all(|x| (x - 0.5).abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fock_car_for_random_vectors(f in complex_vec(3), g in complex_vec(3)) {
        let s = ModeSpace::new(3).unwrap();
        let af = create_op(s, &f).unwrap().adjoint();
        let ag_star = create_op(s, &g).unwrap();
        // create_op is linear, so its adjoint is antilinear: {a(f), a*(g)} = ⟨g, f⟩.
        let ac = anticommutator(&af, &ag_star);
        prop_assert!((&ac - &SparseOperator::identity(s.dim()).scale(inner(&g, &f))).max_abs() < 1e-12);
        prop_assert!(anticommutator(&af, &create_op(s, &f).unwrap().adjoint()).max_abs() < 1e-12);
    }

    #[test]
    fn second_quantization_is_multiplicative(a in complex_matrix(3), b in complex_matrix(3)) {
        let s = ModeSpace::new(3).unwrap();
        let (a, b) = (contraction(a), contraction(b));
        let lab = second_quantize(s, s, &(&a * &b)).unwrap();
        let la = second_quantize(s, s, &a).unwrap();
        let lb = second_quantize(s, s, &b).unwrap();
        prop_assert!((&lab - &(&la * &lb)).max_abs() < 1e-12);
        let la_star = second_quantize(s, s, &a.adjoint()).unwrap();
        prop_assert!((&la_star - &la.adjoint()).max_abs() < 1e-12);
    }

    #[test]
    fn doubled_representation_satisfies_car(lam in lambdas(3)) {
        let rep = QuasiFreeRep::new(Covariance::new(lam).unwrap()).unwrap();
        prop_assert!(car_check(&rep).max() < 1e-12);
    }

    #[test]
    fn moments_match_determinant(
        lam in lambdas(3),
        f1 in complex_vec(3), f2 in complex_vec(3),
        g1 in complex_vec(3), g2 in complex_vec(3),
    ) {
        let cov = Covariance::new(lam).unwrap();
        let rep = QuasiFreeRep::new(cov.clone()).unwrap();
        let a = |f: &Vector<f64>| rep.rep_annihilator(f).unwrap();
        // a*(f_2) a*(f_1) a(g_1) a(g_2)
        let x = &(&(&a(&f2).adjoint() * &a(&f1).adjoint()) * &a(&g1)) * &a(&g2);
        let expected = quasifree_moment(&cov, &[f1.clone(), f2.clone()], &[g1.clone(), g2.clone()]).unwrap();
        prop_assert!((rep.vacuum_expectation(&x) - expected).norm() < 1e-10);
        let y = &a(&f1).adjoint() * &a(&g1);
        let expected = quasifree_moment(&cov, &[f1], &[g1]).unwrap();
        prop_assert!((rep.vacuum_expectation(&y) - expected).norm() < 1e-10);
    }
}
