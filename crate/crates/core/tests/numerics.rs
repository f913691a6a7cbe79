mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdmpc_core::numerics::*;

/// Truncated Taylor series of `exp(M)` after scaling by `2^-s`.
fn series_expm(m: &Matrix<f64>) -> Matrix<f64> {
    let s = 8;
    let x = m.scale(1.0 / f64::powi(2.0, s));
    let n = m.rows();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = (&term * &x).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn spd_strategy(n: usize) -> impl Strategy<Value = Matrix<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |d| {
        let g = Matrix::new(n, n, d).unwrap();
        &(&g * &g.transpose()) + &Matrix::identity(n).scale(0.1)
    })
}

#[test]
fn pendulum_zoh_matches_series_oracle() {
    let a_c = Matrix::from_rows(&[[0.0, 1.0], [14.7, 0.0]]).unwrap();
    let b_c = Matrix::from_rows(&[[0.0], [30.0]]).unwrap();
    let (a, b) = discretize_zoh(&a_c, &b_c, 0.1).unwrap();
    let mut aug = Matrix::zeros(3, 3);
    aug.set_block(0, 0, &a_c.scale(0.1));
    aug.set_block(0, 2, &b_c.scale(0.1));
    let e = series_expm(&aug);
    assert!((&a - &e.block(0, 0, 2, 2)).max_abs() < 1e-10);
    assert!((&b - &e.block(0, 2, 2, 1)).max_abs() < 1e-10);
    // cosh/sinh closed form for the A block
    let w = 14.7f64.sqrt();
    assert_abs_diff_eq!(a[(0, 0)], (w * 0.1).cosh(), epsilon = 1e-12);
    assert_abs_diff_eq!(a[(0, 1)], (w * 0.1).sinh() / w, epsilon = 1e-12);
}

#[test]
fn pendulum_dare_residual() {
    let model = common::pendulum_model();
    let q = Matrix::identity(2);
    let r = Matrix::identity(1);
    let sol = solve_dare(model.a(), model.b(), &q, &r).unwrap();
    let res = sol.residual(model.a(), model.b(), &q, &r);
    assert!(res <= 1e-9 * spectral_norm(&sol.p), "residual {res}");
    let acl = model.a() - &(model.b() * &sol.k);
    assert!(spectral_radius_estimate(&acl, 40) < 1.0);
    assert!(sym_eig(&sol.p).unwrap().min() > 0.0);
}

#[test]
fn weighted_extremes_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w = common::random_spd(&mut rng, 3);
    let m = common::random_spd(&mut rng, 3);
    let (lo, hi) = weighted_extremes(&w, &m).unwrap();
    for _ in 0..100 {
        let x = common::random_vec(&mut rng, 3, 1.0);
        let (xw, xm) = (w.quad_form(&x), m.quad_form(&x));
        assert!(lo * xm <= xw * (1.0 + 1e-12) && xw <= hi * xm * (1.0 + 1e-12));
    }
    let neg = Matrix::from_diag(&[1.0, -1.0, 1.0]);
    assert!(matches!(weighted_extremes(&neg, &m), Err(tdmpc_core::Error::NotPositiveDefinite { name: "W", .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstruction_and_orthonormality(s in (1usize..7).prop_flat_map(spd_strategy)) {
        let e = sym_eig(&s).unwrap();
        let scale = s.frobenius_norm();
        prop_assert!((&e.reconstruct() - &s).frobenius_norm() <= 1e-10 * scale);
        let vtv = &e.vectors.transpose() * &e.vectors;
        prop_assert!((&vtv - &Matrix::identity(s.rows())).frobenius_norm() <= 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sqrt_reconstruction(s in (1usize..6).prop_flat_map(spd_strategy)) {
        let roots = mat_sqrt(&s, "S").unwrap();
        prop_assert!((&(&roots.sqrt * &roots.sqrt) - &s).frobenius_norm() <= 1e-10 * s.frobenius_norm());
        let id = &roots.sqrt * &roots.inv_sqrt;
        prop_assert!((&id - &Matrix::identity(s.rows())).max_abs() <= 1e-9);
    }

    #[test]
    fn spectral_norm_matches_gram(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_matrix(&mut rng, rows, cols, 2.0);
        let gram = &a.transpose() * &a;
        let expected = sym_eig(&gram.symmetric_part()).unwrap().max().max(0.0).sqrt();
        prop_assert!((spectral_norm(&a) - expected).abs() <= 1e-10 * (1.0 + expected));
    }

    #[test]
    fn zoh_matches_series(seed in any::<u64>(), n in 1usize..4, m in 1usize..3, ts in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a_c = common::random_matrix(&mut rng, n, n, 3.0);
        let b_c = common::random_matrix(&mut rng, n, m, 3.0);
        let norm = spectral_norm(&a_c) * ts;
        if norm > 5.0 {
            a_c = a_c.scale(5.0 / norm);
        }
        let (a, b) = discretize_zoh(&a_c, &b_c, ts).unwrap();
        let mut aug = Matrix::zeros(n + m, n + m);
        aug.set_block(0, 0, &a_c.scale(ts));
        aug.set_block(0, n, &b_c.scale(ts));
        let e = series_expm(&aug);
        let scale = 1.0 + e.max_abs();
        prop_assert!((&a - &e.block(0, 0, n, n)).max_abs() <= 1e-10 * scale);
        prop_assert!((&b - &e.block(0, n, n, m)).max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn dare_identity_on_random_stabilizable_pairs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3;
        let a = common::random_matrix(&mut rng, n, n, 0.8);
        let b = common::random_matrix(&mut rng, n, 2, 1.0);
        let q = common::random_spd(&mut rng, n);
        let r = common::random_spd(&mut rng, 2);
        let sol = solve_dare(&a, &b, &q, &r).unwrap();
        prop_assert!(sol.residual(&a, &b, &q, &r) <= 1e-9 * spectral_norm(&sol.p));
        let acl = &a - &(&b * &sol.k);
        prop_assert!(spectral_radius_estimate(&acl, 40) < 1.0);
    }
}
