use nalgebra::{DMatrix, DVector, SymmetricEigen};
use opstep_core::pde::*;
use proptest::prelude::*;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn field(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolvent_is_sup_nonexpansive(
        (d, u, v) in (2usize..40).prop_flat_map(|d| (Just(d), field(d), field(d))),
        tau in 1e-4f64..1.0,
    ) {
        let g = make_grid(0.0, 1.0, d).unwrap();
        let r = resolvent(&g, tau);
        let (u, v) = (Field::new(g, u).unwrap(), Field::new(g, v).unwrap());
        let num = sup_norm(&r.apply(&u).sub(&r.apply(&v)));
        let den = sup_norm(&u.sub(&v));
        prop_assert!(num <= den * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn resolvent_inverts_shifted_laplacian(d in 2usize..24, tau in 1e-3f64..0.5) {
        let g = make_grid(-1.0, 2.0, d).unwrap();
        let a = to_na(neg_laplacian(&g).entries());
        let shifted = DMatrix::identity(d, d) + a * tau;
        let inv = shifted.try_inverse().unwrap();
        let r = to_na(resolvent(&g, tau).entries());
        prop_assert!((inv - r).amax() < 1e-12);
    }

    #[test]
    fn lu_matches_dense_solver(
        (d, noise, b) in (1usize..12).prop_flat_map(|d| {
            (Just(d), prop::collection::vec(-1.0f64..1.0, d * d), prop::collection::vec(-1.0f64..1.0, d))
        })
    ) {
        let a = Matrix::from_fn(d, d, |i, j| noise[i * d + j] + if i == j { d as f64 + 1.0 } else { 0.0 });
        let x = lu_factor(&a).unwrap().solve(&b).unwrap();
        let oracle = to_na(&a).lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for (p, q) in x.iter().zip(oracle.iter()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn eigenpairs_match_symmetric_solver() {
    for d in [2, 5, 16, 33] {
        let g = make_grid(0.0, 1.0, d).unwrap();
        let es = eigensystem(&g);
        let mut oracle: Vec<f64> = SymmetricEigen::new(to_na(neg_laplacian(&g).entries()))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        oracle.sort_by(f64::total_cmp);
        for (l, o) in es.eigenvalues().iter().zip(&oracle) {
            assert!((l - o).abs() <= 1e-9 * o.abs().max(1.0), "d = {d}: {l} vs {o}");
        }
        let a = neg_laplacian(&g);
        for k in 1..=d {
            let phi = es.mode(k);
            let lam = es.eigenvalues()[k - 1];
            assert!(a.apply(&phi).max_abs_diff(&phi.scale(lam)) <= 1e-9 * lam);
        }
    }
}

#[test]
fn spectral_round_trip() {
    let g = make_grid(0.0, 2.0, 20).unwrap();
    let es = eigensystem(&g);
    let u = Field::from_fn(g, |x| x * (2.0 - x) * (3.0 * x).cos());
    let c = es.coefficients(u.values(), 20);
    let back = es.synthesize(&c);
    assert!(u.values().iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn resolvent_of_constant_stays_below_one() {
    // Dirichlet data pull the image of the constant field strictly inside (0, 1).
    let g = make_grid(0.0, 1.0, 64).unwrap();
    for tau in [0.001, 0.01, 0.1] {
        let out = resolvent(&g, tau).apply(&Field::from_fn(g, |_| 1.0));
        assert!(out.values().iter().all(|v| *v > 0.0 && *v < 1.0));
    }
}

#[test]
fn norms_of_single_mode() {
    let g = make_grid(0.0, 1.0, 127).unwrap();
    let u = Field::from_fn(g, |x| (std::f64::consts::PI * x).sin());
    assert!((sup_norm(&u) - 1.0).abs() < 1e-3);
    assert!((l2_norm(&u) - 0.5f64.sqrt()).abs() < 1e-3);
    let expected = (0.5 + 0.5 * std::f64::consts::PI.powi(2)).sqrt();
    // The nodal sum omits the endpoint contributions of the derivative, an O(h) defect.
    assert!((h1_norm(&u) - expected).abs() < 2.0 * u.grid().h() * expected);
}

#[test]
fn singular_pivot_is_reported() {
    let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(matches!(lu_factor(&a), Err(opstep_core::Error::NearZeroPivot { .. })));
}
