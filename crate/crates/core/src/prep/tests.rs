use super::*;
use crate::series::indices_up_to;
use crate::linalg::C64;
use crate::random::{random_hermitian, random_unitary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scalar(v: f64) -> Matrix {
    Matrix::from_real_diag(&[v])
}

/// `f = t + x + t x` in one variable.
fn scalar_example(order: u32) -> MSeries {
    MSeries::from_terms(
        1,
        1,
        order,
        [
            (MultiIndex::new(1, vec![0]), scalar(1.0)),
            (MultiIndex::new(0, vec![1]), scalar(1.0)),
            (MultiIndex::new(1, vec![1]), scalar(1.0)),
        ],
    )
    .unwrap()
}

fn binomial_half(k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (0.5 - i as f64) / (i as f64 + 1.0))
}

fn random_f(rng: &mut ChaCha8Rng, nvars: usize, dim: usize, order: u32) -> MSeries {
    let mut f = MSeries::zero(nvars, dim, order);
    for idx in indices_up_to(nvars, order) {
        if idx.is_zero() {
            continue;
        }
        let c = if idx == MultiIndex::t(1, nvars) {
            &Matrix::identity(dim) + &random_hermitian(rng, dim, 0.3)
        } else {
            random_hermitian(rng, dim, 1.0)
        };
        f.set(idx, c).unwrap();
    }
    f
}

#[test]
fn identity_preparations() {
    let f = MSeries::monomial(1, 4, MultiIndex::t(1, 1), Matrix::identity(2)).unwrap();
    let r = prepare_formal(&PreparationInput::new(f, 4, Branch::HermitianUnique)).unwrap();
    assert_eq!(r.u.len(), 1);
    assert_eq!(r.u.coeff(&MultiIndex::zero(1)), Some(&Matrix::identity(2)));
    assert!(r.m.is_empty());
    assert_eq!(r.residual_max, 0.0);

    let mut f = MSeries::monomial(1, 4, MultiIndex::t(1, 1), Matrix::identity(2)).unwrap();
    f.set(MultiIndex::x(0, 1, 1), Matrix::identity(2)).unwrap();
    let r = prepare_formal(&PreparationInput::new(f, 4, Branch::HermitianUnique)).unwrap();
    assert_eq!(r.u.len(), 1);
    assert_eq!(r.m.len(), 1);
    assert_eq!(r.m.coeff(&MultiIndex::x(0, 1, 1)), Some(&Matrix::identity(2)));
}

#[test]
fn scalar_closed_form() {
    let order = 8;
    let r = prepare_formal(&PreparationInput::new(scalar_example(order), order, Branch::HermitianUnique))
        .unwrap();
    for k in 0..=order {
        let u = r.u.coeff_or_zero(&MultiIndex::new(0, vec![k]))[(0, 0)];
        assert!((u - C64::new(binomial_half(k), 0.0)).norm() < 1e-12, "U_0,{k} = {u}");
        for j in 1..=order - k {
            assert!(r.u.coeff(&MultiIndex::new(j, vec![k])).is_none());
        }
        if k >= 1 {
            let m = r.m.coeff_or_zero(&MultiIndex::new(0, vec![k]))[(0, 0)];
            let want = if k % 2 == 1 { 1.0 } else { -1.0 };
            assert!((m - C64::new(want, 0.0)).norm() < 1e-12, "M_{k} = {m}");
        }
    }
    assert!(r.residual_max < 1e-14);
    assert!((binomial_half(2) + 0.125).abs() < 1e-16);
}

#[test]
fn scalar_product_evaluates_to_closed_form() {
    let order = 12;
    let r = prepare_formal(&PreparationInput::new(scalar_example(order), order, Branch::HermitianUnique))
        .unwrap();
    let (t, x) = (0.1, 0.2);
    let u = r.u.eval(t, &[x]).unwrap()[(0, 0)].re;
    let m = r.m.eval(0.0, &[x]).unwrap()[(0, 0)].re;
    assert!((u - (1.0f64 + x).sqrt()).abs() < 1e-8);
    assert!((m - x / (1.0 + x)).abs() < 1e-8);
}

#[test]
fn unitary_conjugated_pencil() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = random_unitary(&mut rng, 2);
    let order = 5;
    let d = MSeries::from_terms(
        1,
        2,
        order,
        [
            (MultiIndex::t(1, 1), Matrix::identity(2)),
            (MultiIndex::x(0, 1, 1), Matrix::from_real_diag(&[1.0, -1.0])),
        ],
    )
    .unwrap();
    let f = d.left_mul_matrix(&v).right_mul_matrix(&v.adjoint());
    let r = prepare_formal(&PreparationInput::new(f.clone(), order, Branch::HermitianUnique)).unwrap();
    assert!(r.residual_max <= 1e-10);
    // V V* = I, so the Hermitian representative is U = I, M = V D V*
    assert_eq!(r.u.len(), 1);
    assert!((&r.u.coeff_or_zero(&MultiIndex::zero(1)) - &Matrix::identity(2)).max_abs() < 1e-14);
    let m1 = &(&v * &Matrix::from_real_diag(&[1.0, -1.0])) * &v.adjoint();
    assert!((&r.m.coeff_or_zero(&MultiIndex::x(0, 1, 1)) - &m1).max_abs() < 1e-14);
    // (V, D) is another factorization with the same residual
    let vd = verify_preparation(
        &f,
        &MSeries::constant(1, order, v.clone()),
        &XSeries::new(d.t_layer(0).into_series()).unwrap(),
        order,
    )
    .unwrap();
    assert!(vd.max() <= 1e-10);
}

#[test]
fn random_inputs_have_vanishing_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (nvars, dim, order) in [(1, 1, 8), (2, 3, 6), (3, 2, 5), (1, 4, 8)] {
        let f = random_f(&mut rng, nvars, dim, order);
        let r = prepare_formal(&PreparationInput::new(f.clone(), order, Branch::HermitianUnique)).unwrap();
        assert!(r.within(1e-9), "residual {} vs |F| {}", r.residual_max, r.f_norm);
        assert!(r.u.hermitian_defect() < 1e-11);
        assert!(r.m.hermitian_defect() < 1e-11);
        assert!(r.m.coeff(&MultiIndex::zero(nvars)).is_none());

        let g = prepare_formal(&PreparationInput::new(f, order, Branch::general())).unwrap();
        assert!(g.within(1e-9));
    }
}

#[test]
fn gauges_change_u_but_not_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = random_f(&mut rng, 2, 3, 5);
    let mut gauge = BTreeMap::new();
    gauge.insert(MultiIndex::new(1, vec![0, 1]), random_hermitian(&mut rng, 3, 1.0).scale(crate::linalg::I));
    let a = prepare_formal(&PreparationInput::new(f.clone(), 5, Branch::general())).unwrap();
    let b = prepare_formal(&PreparationInput::new(f, 5, Branch::General { gauge })).unwrap();
    assert!(a.u.sub(&b.u).unwrap().max_norm() > 1e-3);
    assert!(a.within(1e-9) && b.within(1e-9));
}

#[test]
fn rejects_non_skew_gauge() {
    let f = scalar_example(3);
    let mut gauge = BTreeMap::new();
    gauge.insert(MultiIndex::new(1, vec![0]), scalar(1.0));
    assert!(prepare_formal(&PreparationInput::new(f, 3, Branch::General { gauge })).is_err());
}

#[test]
fn preconditions() {
    let indefinite = MSeries::monomial(1, 3, MultiIndex::t(1, 1), Matrix::from_real_diag(&[1.0, -1.0])).unwrap();
    assert!(matches!(
        prepare_formal(&PreparationInput::new(indefinite, 3, Branch::HermitianUnique)),
        Err(Error::NotPositiveTimeDerivative { .. })
    ));
    let mut shifted = scalar_example(3);
    shifted.set(MultiIndex::zero(1), scalar(0.5)).unwrap();
    let err = prepare_formal(&PreparationInput::new(shifted.clone(), 3, Branch::HermitianUnique)).unwrap_err();
    assert!(matches!(err, Error::NonzeroConstantTerm { .. }));
    assert!(err.is_precondition());

    let (r, f00) = prepare_with_remainder(&shifted, 3, Branch::HermitianUnique).unwrap();
    assert_eq!(f00, scalar(0.5));
    assert!(r.residual_max < 1e-14);

    let mut non_herm = MSeries::monomial(1, 3, MultiIndex::t(1, 1), Matrix::identity(2)).unwrap();
    non_herm
        .set(MultiIndex::x(0, 1, 1), Matrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap())
        .unwrap();
    assert!(matches!(
        prepare_formal(&PreparationInput::new(non_herm, 3, Branch::HermitianUnique)),
        Err(Error::NonHermitianInput { .. })
    ));
}

#[test]
fn remainder_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let c = random_hermitian(&mut rng, 2, 1.0);
    let mut f = MSeries::monomial(1, 4, MultiIndex::t(1, 1), Matrix::identity(2)).unwrap();
    f.set(MultiIndex::zero(1), c.clone()).unwrap();
    let (r, f00) = prepare_with_remainder(&f, 4, Branch::HermitianUnique).unwrap();
    assert_eq!(f00, c);
    assert_eq!(r.u.len(), 1);
    assert!(r.m.is_empty());

    let f = random_f(&mut rng, 2, 3, 6);
    let (r, f00) = prepare_with_remainder(&f, 6, Branch::HermitianUnique).unwrap();
    assert!(f00.is_zero());
    assert!(r.within(1e-9));
}

#[test]
fn residual_detects_tampering() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let f = random_f(&mut rng, 1, 2, 5);
    let r = prepare_formal(&PreparationInput::new(f.clone(), 5, Branch::HermitianUnique)).unwrap();
    let idx = MultiIndex::new(1, vec![1]);
    for delta in [1e-3, 1e-6] {
        let mut u = r.u.clone();
        let bumped = &u.coeff_or_zero(&idx) + &Matrix::identity(2).scale_real(delta);
        u.set(idx.clone(), bumped).unwrap();
        let table = verify_preparation(&f, &u, &r.m, 5).unwrap();
        assert!(table.max() >= 0.5 * delta, "{} vs {delta}", table.max());
    }
}

#[test]
fn gauge_covariance_of_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let f = random_f(&mut rng, 2, 3, 5);
    let r = prepare_formal(&PreparationInput::new(f.clone(), 5, Branch::HermitianUnique)).unwrap();
    let a = random_unitary(&mut rng, 3);
    let u = r.u.right_mul_matrix(&a);
    let m = XSeries::new(r.m.left_mul_matrix(&a.adjoint()).right_mul_matrix(&a)).unwrap();
    let rotated = verify_preparation(&f, &u, &m, 5).unwrap();
    for (x, y) in rotated.per_degree.iter().zip(&r.diagnostics.per_degree) {
        assert!((x - y).abs() <= 1e-12);
    }
}

fn random_series(rng: &mut ChaCha8Rng, nvars: usize, dim: usize, order: u32, t_free: bool, scale: f64) -> MSeries {
    let mut s = MSeries::zero(nvars, dim, order);
    for idx in indices_up_to(nvars, order) {
        if t_free && idx.j() > 0 {
            continue;
        }
        s.set(idx, random_hermitian(rng, dim, scale)).unwrap();
    }
    s
}

#[test]
fn f_map_examples() {
    let order = 4;
    let id = MSeries::constant(1, order, Matrix::identity(2));
    let (f1, f0) = nonlinear_f_map(&id, &XSeries::zero(1, 2, order)).unwrap();
    assert_eq!(f1.with_order(3), MSeries::constant(1, 3, Matrix::identity(2)));
    assert!(f0.is_empty());

    let mx = XSeries::new(MSeries::monomial(1, order, MultiIndex::x(0, 1, 1), Matrix::identity(2)).unwrap()).unwrap();
    let (f1, f0) = nonlinear_f_map(&id, &mx).unwrap();
    assert_eq!(f1.len(), 1);
    assert_eq!(f0.coeff(&MultiIndex::x(0, 1, 1)), Some(&Matrix::identity(2)));
}

#[test]
fn differential_examples() {
    let order = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let id = MSeries::constant(1, order, Matrix::identity(2));
    let zero_m = XSeries::zero(1, 2, order);
    let m = XSeries::new(random_series(&mut rng, 1, 2, order, true, 1.0)).unwrap();
    let (a1, a0) = apply_df(&id, &zero_m, &MSeries::zero(1, 2, order), &m).unwrap();
    assert!(a1.is_empty());
    assert_eq!(a0.as_series(), m.as_series());

    let c = random_hermitian(&mut rng, 2, 1.0);
    let du = MSeries::constant(1, order, c.scale_real(0.5));
    let (a1, a0) = apply_df(&id, &zero_m, &du, &zero_m).unwrap();
    assert!((&a1.coeff_or_zero(&MultiIndex::zero(1)) - &c).max_abs() < 1e-15);
    assert_eq!(a1.len(), 1);
    assert!(a0.is_empty());

    let (back_u, back_m) =
        solve_df_at_m0(&id, &MSeries::constant(1, order, c.clone()), &zero_m, SolveMode::GaugeZero).unwrap();
    assert!(back_m.is_empty());
    assert!(back_u.sub(&du.with_order(order - 1)).unwrap().max_norm() < 1e-15);

    // constant A0 with A1 = 0 gives m = A0 and u = 0
    let a0 = XSeries::new(MSeries::constant(1, order, c.clone())).unwrap();
    let (back_u, back_m) =
        solve_df_at_m0(&id, &MSeries::zero(1, 2, order - 1), &a0, SolveMode::SymmetricUnique).unwrap();
    assert_eq!(back_m.as_series(), a0.as_series());
    assert!(back_u.max_norm() < 1e-15);
}

#[test]
fn differential_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let order = 4;
    let (nvars, dim) = (2, 2);
    let u = random_series(&mut rng, nvars, dim, order, false, 0.5);
    let m = XSeries::new(random_series(&mut rng, nvars, dim, order, true, 0.5)).unwrap();
    let du = random_series(&mut rng, nvars, dim, order, false, 1.0);
    let dm = XSeries::new(random_series(&mut rng, nvars, dim, order, true, 1.0)).unwrap();
    let (a1, a0) = apply_df(&u, &m, &du, &dm).unwrap();
    let (f1, f0) = nonlinear_f_map(&u, &m).unwrap();
    let mut errors = Vec::new();
    for eps in [1e-3, 1e-4, 1e-5] {
        let up = u.add(&du.scale_real(eps)).unwrap();
        let mp = XSeries::new(m.add(&dm.scale_real(eps)).unwrap()).unwrap();
        let (g1, g0) = nonlinear_f_map(&up, &mp).unwrap();
        let e1 = g1.sub(&f1).unwrap().scale_real(1.0 / eps).sub(&a1).unwrap().max_norm();
        let e0 = g0.sub(&f0).unwrap().scale_real(1.0 / eps).sub(&a0).unwrap().max_norm();
        errors.push(e1.max(e0));
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((5.0..=20.0).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn differential_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let order = 5;
    let (nvars, dim) = (2, 3);
    for _ in 0..3 {
        let mut u = random_series(&mut rng, nvars, dim, order, false, 0.3);
        u.set(MultiIndex::zero(nvars), &Matrix::identity(dim) + &random_hermitian(&mut rng, dim, 0.3))
            .unwrap();
        let du = random_series(&mut rng, nvars, dim, order, false, 1.0);
        let dm = XSeries::new(random_series(&mut rng, nvars, dim, order, true, 1.0)).unwrap();
        let zero_m = XSeries::zero(nvars, dim, order);
        let (a1, a0) = apply_df(&u, &zero_m, &du, &dm).unwrap();
        let (back_u, back_m) = solve_df_at_m0(&u, &a1, &a0, SolveMode::SymmetricUnique).unwrap();
        assert!(back_m.sub(&dm).unwrap().max_norm() < 1e-9);
        assert!(back_u.sub(&du.with_order(order - 1)).unwrap().max_norm() < 1e-9);

        // the gauge-free solution also satisfies the equations, but is not Hermitian
        let (g_u, g_m) = solve_df_at_m0(&u, &a1, &a0, SolveMode::GaugeZero).unwrap();
        let low = order - 1;
        let zero_low = XSeries::zero(nvars, dim, low);
        let g_m = XSeries::new(g_m.with_order(low)).unwrap();
        let (b1, b0) = apply_df(&u.with_order(low), &zero_low, &g_u, &g_m).unwrap();
        assert!(b1.sub(&a1.with_order(order - 2)).unwrap().max_norm() < 1e-9);
        assert!(b0.sub(&a0.with_order(order - 1)).unwrap().max_norm() < 1e-9);
    }
}
