use super::*;
use crate::linalg::norm2;
use crate::probes::rng::CounterRng;
use crate::probes::{draw_rank_one, Distribution};
use proptest::prelude::*;

fn random_dense(r: usize, c: usize, rng: &mut CounterRng) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.next_gaussian())
}

fn random_vec(n: usize, rng: &mut CounterRng) -> Vec<f64> {
    (0..n).map(|_| rng.next_gaussian()).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

fn tridiag(m: usize, lo: f64, d: f64, up: f64) -> DenseMatrix {
    DenseMatrix::from_fn(m, m, |i, j| {
        if i == j {
            d
        } else if i == j + 1 {
            lo
        } else if j == i + 1 {
            up
        } else {
            0.0
        }
    })
}

/// Dense `C₁ ⊗ I + I ⊗ C₂` built from the matrix Kronecker product.
fn kron_sum_dense(c1: &DenseMatrix, c2: &DenseMatrix) -> DenseMatrix {
    let (nt, nh) = (c1.rows(), c2.rows());
    c1.kron(&DenseMatrix::identity(nh))
        .add(&DenseMatrix::identity(nt).kron(c2))
        .unwrap()
}

#[test]
fn rank_one_path_matches_dense_on_random_kronecker_sums() {
    let mut rng = CounterRng::new(11, 0, 0);
    for case in 0..100 {
        let nt = 1 + case % 5;
        let nh = 1 + (case / 5) % 6;
        let c1 = random_dense(nt, nt, &mut rng);
        let c2 = random_dense(nh, nh, &mut rng);
        let op = LinearOperator::kronecker_sum(&c1, &c2).unwrap();
        let dense = kron_sum_dense(&c1, &c2);
        let (xt, xh) = (random_vec(nt, &mut rng), random_vec(nh, &mut rng));
        let x = kron(&xt, &xh);

        let fast = op.apply_rank_one(&xt, &xh).unwrap();
        let slow = dense.mat_vec(&x).unwrap();
        assert!(rel_err(&fast, &slow) <= 1e-12, "case {case}");
        assert!(rel_err(&op.apply(&x).unwrap(), &slow) <= 1e-12);
        assert!(rel_err(&op.apply_transpose(&x).unwrap(), &dense.mat_vec_transpose(&x).unwrap()) <= 1e-12);

        let q = op.quadratic_form_rank_one(&xt, &xh).unwrap();
        let q_ref = dot(&x, &slow);
        assert!((q - q_ref).abs() <= 1e-12 * norm2(&x) * norm2(&slow));
        let img = op.image_norm_sq_rank_one(&xt, &xh).unwrap();
        assert!((img - norm2_sq(&slow)).abs() <= 1e-12 * norm2_sq(&slow));
    }
}

#[test]
fn rank_one_path_is_cheaper() {
    let t = tridiag(40, -1.0, 2.0, -1.0);
    let op = LinearOperator::kronecker_sum(&t, &t).unwrap();
    let (xt, xh) = (vec![1.0; 40], vec![0.5; 40]);
    op.apply_rank_one(&xt, &xh).unwrap();
    let fast = op.work_count();
    assert_eq!(fast, (2 * t.rows() * 3 - 4 + 2 * 1600) as u64);
    op.reset_work();
    op.apply(&kron(&xt, &xh)).unwrap();
    // each block row of the full product touches every nonzero of C₂ and C₁
    assert_eq!(op.work_count(), 2 * 40 * 118);
    assert!(op.work_count() > fast);
}

#[test]
fn closed_form_trace_and_frobenius_match_dense() {
    let mut rng = CounterRng::new(12, 0, 0);
    let c1 = random_dense(3, 3, &mut rng);
    let c2 = random_dense(4, 4, &mut rng);
    let op = LinearOperator::kronecker_sum(&c1, &c2).unwrap();
    let d = kron_sum_dense(&c1, &c2);
    assert!((op.exact_trace().unwrap() - d.trace()).abs() < 1e-12);
    assert!((op.exact_frobenius_norm_sq().unwrap() - d.frobenius_norm().powi(2)).abs() < 1e-10);
    assert_eq!(op.to_dense().unwrap(), d);

    let l = random_dense(12, 2, &mut rng);
    let r = random_dense(12, 2, &mut rng);
    let lr = LinearOperator::low_rank(l.clone(), r.clone(), ProbeShape::new(4, 3).unwrap()).unwrap();
    let d = l.matmul(&r.transpose()).unwrap();
    assert!((lr.exact_trace().unwrap() - d.trace()).abs() < 1e-12);
    assert!((lr.exact_frobenius_norm_sq().unwrap() - d.frobenius_norm().powi(2)).abs() < 1e-10);
}

#[test]
fn eigen_and_lu_inverses_agree() {
    let t = tridiag(7, -1.0, 2.0, -1.0).scaled(64.0);
    let s = tridiag(5, -1.0, 2.5, -1.0);
    let a = LinearOperator::kronecker_sum(&t, &s).unwrap();
    let eig = LinearOperator::inverse(&a).unwrap();
    let lu = LinearOperator::inverse_with(&a, InverseMethod::Lu).unwrap();
    assert!(matches!(eig.kind(), OperatorKind::FactorizedInverse(InverseSolver::KroneckerEigen { .. })));
    assert!(matches!(lu.kind(), OperatorKind::FactorizedInverse(InverseSolver::Lu(_))));

    let mut rng = CounterRng::new(13, 0, 0);
    let v = random_vec(35, &mut rng);
    let back = a.apply(&eig.apply(&v).unwrap()).unwrap();
    assert!(rel_err(&back, &v) < 1e-12);
    assert!(rel_err(&eig.apply(&v).unwrap(), &lu.apply(&v).unwrap()) < 1e-12);

    let (xt, xh) = (random_vec(7, &mut rng), random_vec(5, &mut rng));
    let x = kron(&xt, &xh);
    let y = lu.apply(&x).unwrap();
    assert!(rel_err(&eig.apply_rank_one(&xt, &xh).unwrap(), &y) < 1e-12);
    let q = eig.quadratic_form_rank_one(&xt, &xh).unwrap();
    assert!((q - dot(&x, &y)).abs() < 1e-12 * dot(&x, &y).abs());
    let n2 = eig.image_norm_sq_rank_one(&xt, &xh).unwrap();
    assert!((n2 - norm2_sq(&y)).abs() < 1e-12 * norm2_sq(&y));
    assert!((eig.quadratic_form(&x).unwrap() - q).abs() < 1e-12 * q.abs());

    let dense_inv = LuFactorization::new(&a.to_dense().unwrap())
        .unwrap()
        .solve_matrix(&DenseMatrix::identity(35))
        .unwrap();
    assert!((eig.exact_trace().unwrap() - dense_inv.trace()).abs() < 1e-12 * dense_inv.trace());
    let f = dense_inv.frobenius_norm().powi(2);
    assert!((eig.exact_frobenius_norm_sq().unwrap() - f).abs() < 1e-12 * f);
}

#[test]
fn nonsymmetric_kronecker_sum_takes_banded_lu() {
    let c = tridiag(30, -1.3, 2.0, -0.7);
    let a = LinearOperator::kronecker_sum(&c, &c).unwrap();
    let inv = LinearOperator::inverse(&a).unwrap();
    assert!(matches!(
        inv.kind(),
        OperatorKind::FactorizedInverse(InverseSolver::Lu(Factorization::Banded(_)))
    ));
    let mut rng = CounterRng::new(14, 0, 0);
    let v = random_vec(900, &mut rng);
    assert!(rel_err(&a.apply(&inv.apply(&v).unwrap()).unwrap(), &v) < 1e-11);
    assert!(rel_err(&a.apply_transpose(&inv.apply_transpose(&v).unwrap()).unwrap(), &v) < 1e-11);
}

#[test]
fn singular_operators_are_rejected() {
    let z = tridiag(3, 1.0, 0.0, -1.0);
    let a = LinearOperator::kronecker_sum(&z, &z).unwrap();
    assert!(matches!(LinearOperator::inverse(&a), Err(Error::Singular { .. })));
    let s = tridiag(4, -1.0, 1.0, -1.0).scaled(0.0);
    let b = LinearOperator::kronecker_sum(&s, &tridiag(2, 0.0, 0.0, 0.0)).unwrap();
    assert!(matches!(LinearOperator::inverse(&b), Err(Error::Singular { .. })));
}

#[test]
fn gram_forms_are_image_norms() {
    let mut rng = CounterRng::new(15, 0, 0);
    let a = LinearOperator::dense(random_dense(6, 12, &mut rng), ProbeShape::new(4, 3).unwrap()).unwrap();
    let g = LinearOperator::gram(a.clone());
    assert_eq!(g.psd_status(), PsdStatus::ByConstruction);
    let (xt, xh) = (random_vec(3, &mut rng), random_vec(4, &mut rng));
    let x = kron(&xt, &xh);
    let ax = a.apply(&x).unwrap();
    assert!((g.quadratic_form_rank_one(&xt, &xh).unwrap() - norm2_sq(&ax)).abs() < 1e-12 * norm2_sq(&ax));
    assert!((g.quadratic_form(&x).unwrap() - norm2_sq(&ax)).abs() < 1e-12 * norm2_sq(&ax));
    let gx = g.apply(&x).unwrap();
    assert!(rel_err(&gx, &a.apply_transpose(&ax).unwrap()) < 1e-14);
    let a_f = a.frobenius_norm_sq().unwrap();
    assert!((g.exact_trace().unwrap() - a_f).abs() < 1e-12 * a_f);
    g.reset_work();
    g.quadratic_form(&x).unwrap();
    assert_eq!(g.work_count(), 72);
}

#[test]
fn transpose_swaps_actions() {
    let mut rng = CounterRng::new(16, 0, 0);
    let d = random_dense(5, 5, &mut rng);
    let a = LinearOperator::dense(d.clone(), ProbeShape::trivial(5)).unwrap();
    let t = LinearOperator::transpose(a);
    assert_eq!(t.to_dense().unwrap(), d.transpose());
}

#[test]
fn probe_dimensions_are_checked() {
    let t = tridiag(3, -1.0, 2.0, -1.0);
    let op = LinearOperator::kronecker_sum(&t, &tridiag(4, -1.0, 2.0, -1.0)).unwrap();
    assert_eq!((op.shape().n_hat(), op.shape().n_tilde()), (4, 3));
    assert!(op.apply_rank_one(&[1.0; 4], &[1.0; 3]).is_err());
    assert!(op.apply(&[1.0; 11]).is_err());
    assert!(LinearOperator::dense(DenseMatrix::identity(6), ProbeShape::new(4, 2).unwrap()).is_err());
    assert!(op.clone().with_shape(ProbeShape::new(6, 2).unwrap()).is_ok());
}

#[test]
fn stable_rank_examples() {
    let id = LinearOperator::dense_unstructured(DenseMatrix::identity(10));
    assert!((id.stable_rank(StableRankKind::FrobeniusSq, 1e-12).unwrap() - 10.0).abs() < 1e-9);
    assert!((id.stable_rank(StableRankKind::TraceOverNorm, 1e-12).unwrap() - 10.0).abs() < 1e-9);

    let v: Vec<f64> = (0..8).map(|i| (i as f64) - 3.5).collect();
    let col = DenseMatrix::from_fn(8, 1, |i, _| v[i]);
    let vvt = LinearOperator::low_rank(col.clone(), col, ProbeShape::new(4, 2).unwrap()).unwrap();
    assert_eq!(vvt.psd_status(), PsdStatus::ByConstruction);
    assert!((vvt.stable_rank(StableRankKind::FrobeniusSq, 1e-12).unwrap() - 1.0).abs() < 1e-9);

    let d = LinearOperator::dense_unstructured(DenseMatrix::from_diag(&[1.0, 0.5, 0.25]));
    assert!((d.stable_rank(StableRankKind::FrobeniusSq, 1e-13).unwrap() - 21.0 / 16.0).abs() < 1e-9);
    assert!((d.stable_rank(StableRankKind::TraceOverNorm, 1e-13).unwrap() - 1.75).abs() < 1e-9);
}

#[test]
fn psd_assertion_is_recorded() {
    let a = LinearOperator::dense_unstructured(DenseMatrix::identity(3));
    assert!(!a.is_psd());
    let a = a.assert_psd();
    assert_eq!(a.psd_status(), PsdStatus::Asserted);
    assert!(LinearOperator::inverse(&a).unwrap().is_psd());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_quadratic_forms_are_nonnegative(seed in any::<u64>(), nt in 1usize..5, nh in 1usize..5) {
        let mut rng = CounterRng::new(seed, 0, 0);
        let a = LinearOperator::dense(random_dense(nh * nt, nh * nt, &mut rng), ProbeShape::new(nh, nt).unwrap()).unwrap();
        let g = LinearOperator::gram(a);
        for dist in Distribution::ALL {
            if dist.is_rank_one() {
                let p = draw_rank_one(dist, g.shape(), seed, 0);
                prop_assert!(g.quadratic_form_rank_one(&p.tilde, &p.hat).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn spd_inverse_forms_are_positive(seed in any::<u64>(), m in 2usize..7, shift in 0.1f64..3.0) {
        let t = tridiag(m, -1.0, 2.0, -1.0);
        let s = tridiag(m + 1, -1.0, 2.0 + shift, -1.0);
        let a = LinearOperator::kronecker_sum(&t, &s).unwrap();
        let inv = LinearOperator::inverse(&a).unwrap();
        let p = draw_rank_one(Distribution::RankOneGaussian, inv.shape(), seed, 0);
        let x = p.to_vector();
        let q = inv.quadratic_form_rank_one(&p.tilde, &p.hat).unwrap();
        prop_assert!(q > 0.0);
        let y = a.apply(&inv.apply(&x).unwrap()).unwrap();
        prop_assert!(rel_err(&y, &x) < 1e-11);
    }
}
