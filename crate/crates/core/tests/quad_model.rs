mod common;

use common::{
    default_scene, desk_model, random_covariance, random_vector, relative_direction, remainders,
    rng,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use robust_pcrb::fisher_pcrb::{fim_obs_theta, TransmitCovariance};
use robust_pcrb::quad_model::{g_vector, nullspace_basis};
use robust_pcrb::C64;

#[test]
fn taylor_remainder_is_cubic() {
    // Δθ = 0.005; on coarse grids a few directions have a nearly vanishing
    // cubic coefficient and the quartic term shows through.
    let model = desk_model(628, 0.1);
    let mut r = rng(6);
    for _ in 0..20 {
        let d = relative_direction(&model, &mut r);
        let err = remainders(&model, &d, &[1e-2, 5e-3, 2.5e-3]);
        assert!(err[0] / err[1] >= 7.0 && err[1] / err[2] >= 7.0, "{err:?}");
    }
}

#[test]
fn g_vector_reproduces_observation_information() {
    let scene = default_scene();
    let model = desk_model(128, 0.5);
    let mut r = rng(3);
    for _ in 0..10 {
        let w = random_covariance(&mut r, scene.n_tx, 1.0);
        let g = g_vector(&model, &w);
        assert!(g.iter().all(|v| *v >= 0.0));
        let direct = fim_obs_theta(&w, &model.p_bar, &model.gains, &scene).unwrap();
        let via_g = model.p_bar.density().dot(&g);
        assert!(
            (direct - via_g).abs() <= 1e-12 * direct,
            "{direct} vs {via_g}"
        );
    }
    assert_eq!(
        g_vector(&model, &TransmitCovariance::zeros(scene.n_tx)).amax(),
        0.0
    );
}

#[test]
fn model_matrices_are_consistent() {
    let model = desk_model(128, 0.8);
    let q = &model.q_p;
    assert!((q - q.transpose()).amax() <= 1e-10 * q.amax());
    let b = &model.basis;
    let eye = DMatrix::<f64>::identity(b.ncols(), b.ncols());
    assert!((b.transpose() * b - eye).amax() <= 1e-10);
    assert!((DVector::from_element(b.nrows(), 1.0).transpose() * b).amax() <= 1e-10);
    assert!(model.c_p > 0.0);
    assert!((model.ball_radius - 0.8 / model.grid().spacing().sqrt()).abs() <= 1e-12);
}

#[test]
fn helmert_basis_has_closed_form_columns() {
    let b = nullspace_basis(6).unwrap();
    for j in 1..6 {
        let norm = ((j * (j + 1)) as f64).sqrt();
        for i in 0..6 {
            let expected = if i < j {
                1.0 / norm
            } else if i == j {
                -(j as f64) / norm
            } else {
                0.0
            };
            assert!((b[(i, j - 1)] - expected).abs() <= 1e-15);
        }
    }
    assert!(nullspace_basis(1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduced_and_full_constraints_agree(seed in any::<u64>(), scale in 0.0f64..1.0) {
        let scene = default_scene();
        let model = desk_model(64, 1.0);
        let mut r = rng(seed);
        let w = random_covariance(&mut r, scene.n_tx, 1.0);
        let g = g_vector(&model, &w);
        let u = random_vector(&mut r, model.n_points() - 1);
        let u = &u * (scale * model.ball_radius / u.norm());
        let e = &model.basis * &u;
        let full = model.constraint_value(&e, &g);
        let reduced = model.reduced_constraint_value(&u, &g);
        prop_assert!((full - reduced).abs() <= 1e-9 * full.abs().max(1.0), "{} vs {}", full, reduced);
        // Set membership carries across the basis.
        let dt = model.grid().spacing();
        prop_assert!(e.sum().abs() * dt <= 1e-12 * (1.0 + u.norm()));
        prop_assert!((e.norm_squared() - u.norm_squared()).abs() <= 1e-10 * (1.0 + u.norm_squared()));
    }

    #[test]
    fn g_vector_is_linear(seed in any::<u64>(), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let scene = default_scene();
        let model = desk_model(48, 0.5);
        let mut r = rng(seed);
        let w1 = random_covariance(&mut r, scene.n_tx, 1.0);
        let w2 = random_covariance(&mut r, scene.n_tx, 1.0);
        let mix = TransmitCovariance::new_unchecked(w1.matrix() * C64::new(a, 0.0) + w2.matrix() * C64::new(b, 0.0));
        let lhs = g_vector(&model, &mix);
        let rhs = g_vector(&model, &w1) * a + g_vector(&model, &w2) * b;
        prop_assert!((&lhs - &rhs).amax() <= 1e-12 * rhs.amax().max(1.0));
    }

    #[test]
    fn helmert_basis_is_orthonormal_and_projects(n in 2usize..200, seed in any::<u64>()) {
        let b = nullspace_basis(n).unwrap();
        prop_assert_eq!(b.shape(), (n, n - 1));
        let ones = DVector::from_element(n, 1.0);
        prop_assert!((ones.transpose() * &b).amax() <= 1e-12);
        let gram = b.transpose() * &b - DMatrix::identity(n - 1, n - 1);
        prop_assert!(gram.norm() <= 1e-10);
        let mut e = random_vector(&mut rng(seed), n);
        let mean = e.mean();
        e.add_scalar_mut(-mean);
        let back = &b * (b.transpose() * &e);
        prop_assert!((back - &e).norm() <= 1e-10 * e.norm().max(1e-300));
    }
}
