use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symprep_core::prep::{
    apply_df, prepare_formal, prepare_with_remainder, solve_df_at_m0, verify_preparation, Branch,
    PreparationInput, SolveMode,
};
use symprep_core::random::{random_hermitian, random_unitary};
use symprep_core::series::indices_up_to;
use symprep_core::{MSeries, Matrix, MultiIndex, XSeries};

fn random_terms(rng: &mut ChaCha8Rng, nvars: usize, dim: usize, order: u32) -> Vec<(MultiIndex, Matrix)> {
    indices_up_to(nvars, order)
        .into_iter()
        .filter(|idx| !idx.is_zero())
        .map(|idx| {
            let c = if idx == MultiIndex::t(1, nvars) {
                &Matrix::identity(dim) + &random_hermitian(rng, dim, 0.3)
            } else {
                random_hermitian(rng, dim, 1.0)
            };
            (idx, c)
        })
        .collect()
}

#[test]
fn residual_vanishes_across_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for dim in 1..=4 {
        for nvars in 1..=3 {
            let order = [4, 6, 8][rng.gen_range(0..3)];
            let order = if nvars == 3 { order.min(6) } else { order };
            let f = MSeries::from_terms(nvars, dim, order, random_terms(&mut rng, nvars, dim, order)).unwrap();
            let r = prepare_formal(&PreparationInput::new(f, order, Branch::HermitianUnique)).unwrap();
            assert!(r.within(1e-9), "N={dim} n={nvars} P={order}: {}", r.residual_max);
            assert!(r.rhs_max_defect <= 1e-10 * r.f_norm.max(1.0));
        }
    }
}

#[test]
fn insertion_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let terms = random_terms(&mut rng, 2, 3, 6);
    let mut shuffled = terms.clone();
    shuffled.shuffle(&mut rng);
    let a = MSeries::from_terms(2, 3, 6, terms).unwrap();
    let b = MSeries::from_terms(2, 3, 6, shuffled).unwrap();
    let ra = prepare_formal(&PreparationInput::new(a, 6, Branch::HermitianUnique)).unwrap();
    let rb = prepare_formal(&PreparationInput::new(b, 6, Branch::HermitianUnique)).unwrap();
    assert!(ra.u.sub(&rb.u).unwrap().max_norm() <= 1e-13);
    assert!(ra.m.sub(&rb.m).unwrap().max_norm() <= 1e-13);
}

#[test]
fn hermitian_branch_is_the_unique_hermitian_solution() {
    // build F from a known Hermitian U with U_00 > 0 and recover it
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (nvars, dim, order) = (2, 3, 5);
    let mut u = MSeries::zero(nvars, dim, order + 1);
    for idx in indices_up_to(nvars, order + 1) {
        let c = if idx.is_zero() {
            &Matrix::identity(dim) + &random_hermitian(&mut rng, dim, 0.3)
        } else {
            random_hermitian(&mut rng, dim, 0.5)
        };
        u.set(idx, c).unwrap();
    }
    let mut m = MSeries::zero(nvars, dim, order + 1);
    for idx in indices_up_to(nvars, order + 1) {
        if idx.j() == 0 && !idx.is_zero() {
            m.set(idx, random_hermitian(&mut rng, dim, 0.5)).unwrap();
        }
    }
    let m = XSeries::new(m).unwrap();
    let f = u.mul(&MSeries::pencil(&m)).unwrap().mul(&u.adjoint()).unwrap();
    let r = prepare_formal(&PreparationInput::new(f, order, Branch::HermitianUnique)).unwrap();
    assert!(r.u.sub(&u.with_order(order)).unwrap().max_norm() < 1e-9);
    assert!(r.m.sub(&m.with_order(order)).unwrap().max_norm() < 1e-9);
}

#[test]
fn remainder_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut terms = random_terms(&mut rng, 2, 3, 6);
    terms.push((MultiIndex::zero(2), random_hermitian(&mut rng, 3, 1.0)));
    let f = MSeries::from_terms(2, 3, 6, terms).unwrap();
    let (r, f00) = prepare_with_remainder(&f, 6, Branch::HermitianUnique).unwrap();
    let back = r
        .u
        .mul(&MSeries::pencil(&r.m))
        .unwrap()
        .mul(&r.u.adjoint())
        .unwrap()
        .add(&MSeries::constant(2, 6, f00))
        .unwrap();
    assert!(f.sub(&back).unwrap().max_norm() <= 1e-9 * f.max_norm());
}

#[test]
fn gauge_covariance_and_distinct_gauges() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let f = MSeries::from_terms(1, 2, 6, random_terms(&mut rng, 1, 2, 6)).unwrap();
    let r = prepare_formal(&PreparationInput::new(f.clone(), 6, Branch::HermitianUnique)).unwrap();
    let a = random_unitary(&mut rng, 2);
    let rotated = verify_preparation(
        &f,
        &r.u.right_mul_matrix(&a),
        &XSeries::new(r.m.left_mul_matrix(&a.adjoint()).right_mul_matrix(&a)).unwrap(),
        6,
    )
    .unwrap();
    for (x, y) in rotated.per_degree.iter().zip(&r.diagnostics.per_degree) {
        assert!((x - y).abs() <= 1e-12);
    }

    let gauge = |rng: &mut ChaCha8Rng| {
        indices_up_to(1, 5)
            .into_iter()
            .filter(|i| !i.is_zero())
            .map(|i| (i, random_hermitian(rng, 2, 0.5).scale(symprep_core::linalg::I)))
            .collect()
    };
    let g1 = prepare_formal(&PreparationInput::new(f.clone(), 6, Branch::General { gauge: gauge(&mut rng) })).unwrap();
    let g2 = prepare_formal(&PreparationInput::new(f, 6, Branch::General { gauge: gauge(&mut rng) })).unwrap();
    assert!(g1.u.sub(&g2.u).unwrap().max_norm() > 1e-2);
    for (x, y) in g1.diagnostics.per_degree.iter().zip(&g2.diagnostics.per_degree) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn linearization_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..5 {
        let (nvars, dim, order) = (rng.gen_range(1..=2), rng.gen_range(1..=3), 5);
        let mut u = MSeries::zero(nvars, dim, order);
        let mut du = MSeries::zero(nvars, dim, order);
        let mut dm = MSeries::zero(nvars, dim, order);
        for idx in indices_up_to(nvars, order) {
            let c = if idx.is_zero() {
                &Matrix::identity(dim) + &random_hermitian(&mut rng, dim, 0.3)
            } else {
                random_hermitian(&mut rng, dim, 0.3)
            };
            u.set(idx.clone(), c).unwrap();
            du.set(idx.clone(), random_hermitian(&mut rng, dim, 1.0)).unwrap();
            if idx.j() == 0 {
                dm.set(idx, random_hermitian(&mut rng, dim, 1.0)).unwrap();
            }
        }
        let dm = XSeries::new(dm).unwrap();
        let zero = XSeries::zero(nvars, dim, order);
        let (a1, a0) = apply_df(&u, &zero, &du, &dm).unwrap();
        let (bu, bm) = solve_df_at_m0(&u, &a1, &a0, SolveMode::SymmetricUnique).unwrap();
        assert!(bu.hermitian_defect() < 1e-10);
        assert!(bu.sub(&du.with_order(order - 1)).unwrap().max_norm() < 1e-9);
        assert!(bm.sub(&dm).unwrap().max_norm() < 1e-9);
    }
}
