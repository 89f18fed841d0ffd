use invrisk::linalg::{self, Matrix, PINV_TOL};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_na(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn matrix_strategy(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(p, m)| {
        prop::collection::vec(-1.0f64..1.0, p * m).prop_map(move |v| Matrix::from_vec(p, m, v).unwrap())
    })
}

fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// Gram matrix of the columns (or of the rows when `rows` is set).
fn gram(a: &Matrix, rows: bool) -> Matrix {
    if rows {
        a.matmul(&a.transpose()).unwrap()
    } else {
        a.transpose().matmul(a).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs_with_orthonormal_factors(a in matrix_strategy(24)) {
        let s = linalg::svd(&a).unwrap();
        prop_assert!(rel_frobenius(&s.reconstruct(), &a) < 1e-8);
        let d = s.d();
        let eye = Matrix::identity(d);
        prop_assert!(gram(&s.u, false).sub(&eye).unwrap().max_abs() < 1e-8);
        prop_assert!(gram(&s.vt, true).sub(&eye).unwrap().max_abs() < 1e-8);
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.sigma.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn singular_values_match_gram_eigenvalues(a in matrix_strategy(20)) {
        let s = linalg::svd(&a).unwrap();
        let na = to_na(&a);
        let gram = if a.rows() >= a.cols() { na.transpose() * &na } else { &na * na.transpose() };
        let mut eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        let top = eig[0].max(1e-300);
        for (ours, theirs) in s.sigma.iter().zip(&eig) {
            prop_assert!((ours - theirs).abs() <= 1e-7 * top, "{ours} vs {theirs}");
        }
    }

    #[test]
    fn truncated_residual_is_non_increasing_in_k(a in matrix_strategy(12)) {
        let s = linalg::svd(&a).unwrap();
        let r = linalg::effective_rank(&s, PINV_TOL);
        let mut last = f64::INFINITY;
        for k in 0..=r {
            let pinv = linalg::truncated_pinv(&s, k).unwrap();
            let res = a.matmul(&pinv).unwrap().matmul(&a).unwrap().sub(&a).unwrap().frobenius_norm();
            prop_assert!(res <= last + 1e-9);
            last = res;
        }
        prop_assert!(last <= 1e-8 * a.frobenius_norm().max(1.0));
    }
}

#[test]
fn full_rank_pinv_matches_lu_solve() {
    for seed in 0..20u64 {
        let n = 3 + (seed as usize % 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = Matrix::from_vec(n, n, data).unwrap();
        let s = linalg::svd(&a).unwrap();
        let pinv = linalg::truncated_pinv(&s, n).unwrap();
        let inv = to_na(&a).lu().try_inverse().expect("test matrices are invertible");
        let ours = to_na(&pinv);
        assert!((ours - &inv).abs().max() <= 1e-8 * inv.abs().max(), "seed {seed}");
    }
}

#[test]
fn tall_pinv_matches_normal_equations() {
    let (p, m) = (9, 4);
    let data: Vec<f64> = (0..p * m).map(|i| ((i * 37 % 17) as f64 / 17.0) - 0.4).collect();
    let a = Matrix::from_vec(p, m, data).unwrap();
    let na = to_na(&a);
    let normal = (na.transpose() * &na).lu().try_inverse().unwrap() * na.transpose();
    let ours = to_na(&linalg::truncated_pinv(&linalg::svd(&a).unwrap(), m).unwrap());
    assert!((ours - normal).abs().max() < 1e-9);
}

#[test]
fn rank_deficient_input_has_exact_zero_tail() {
    let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![1.0, 0.0, 1.0]]).unwrap();
    let s = linalg::svd(&a).unwrap();
    assert_eq!(linalg::effective_rank(&s, PINV_TOL), 2);
    assert!(matches!(
        linalg::truncated_pinv(&s, 3),
        Err(invrisk::Error::RankExceeded { requested: 3, effective: 2 })
    ));
}
