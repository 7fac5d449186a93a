use nalgebra::DMatrix;
use proptest::prelude::*;
use soma_core::linalg::{reconstruct, svd, ComponentRange, Matrix};

fn to_na(w: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(w.rows(), w.cols(), w.as_slice())
}

fn matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(m, n)| {
        proptest::collection::vec(-10.0f64..10.0, m * n).prop_map(move |d| Matrix::from_vec(m, n, d).unwrap())
    })
}

/// Rank ≤ r product of two random factors.
fn low_rank(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max, 1..=3usize).prop_flat_map(|(m, n, r)| {
        let r = r.min(m).min(n);
        (
            proptest::collection::vec(-3.0f64..3.0, m * r),
            proptest::collection::vec(-3.0f64..3.0, r * n),
        )
            .prop_map(move |(a, b)| {
                Matrix::from_vec(m, r, a).unwrap().matmul(&Matrix::from_vec(r, n, b).unwrap()).unwrap()
            })
    })
}

fn orth_error(q: &Matrix) -> f64 {
    let g = q.t_matmul(q).unwrap();
    g.sub(&Matrix::identity(g.rows())).unwrap().max_abs()
}

fn check_factors(w: &Matrix) -> Result<(), TestCaseError> {
    let f = svd(w).unwrap();
    let k = w.rows().min(w.cols());
    prop_assert_eq!(f.sigma.len(), k);
    prop_assert!(f.sigma.windows(2).all(|p| p[0] >= p[1]));
    prop_assert!(f.sigma.iter().all(|&s| s >= 0.0));
    prop_assert!(orth_error(&f.u) <= 1e-10 * (k as f64).sqrt());
    prop_assert!(orth_error(&f.vt.transpose()) <= 1e-10 * (k as f64).sqrt());
    let back = reconstruct(&f, ComponentRange::full(k)).unwrap();
    prop_assert!(back.sub(w).unwrap().frobenius() <= 1e-10 * w.frobenius().max(f64::MIN_POSITIVE));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn factors_are_orthonormal_and_reconstruct(w in matrix(24)) {
        check_factors(&w)?;
    }

    #[test]
    fn low_rank_inputs_keep_orthonormal_completion(w in low_rank(20)) {
        check_factors(&w)?;
        let f = svd(&w).unwrap();
        prop_assert!(f.rank() <= 3);
    }

    #[test]
    fn singular_values_match_nalgebra(w in matrix(16)) {
        let f = svd(&w).unwrap();
        let mut oracle: Vec<f64> = to_na(&w).singular_values().iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        let scale = oracle[0].max(1.0);
        for (a, b) in f.sigma.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn transpose_has_same_spectrum(w in matrix(16)) {
        let a = svd(&w).unwrap();
        let b = svd(&w.transpose()).unwrap();
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            prop_assert!((x - y).abs() <= 1e-12 * a.sigma[0].max(1.0));
        }
    }

    #[test]
    fn svd_is_deterministic(w in matrix(12)) {
        let a = svd(&w).unwrap();
        let b = svd(&w).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn split_ranges_sum_to_whole(w in matrix(12), cut in 0usize..12) {
        let f = svd(&w).unwrap();
        let k = f.k();
        prop_assume!(k >= 2);
        let cut = 1 + cut % (k - 1);
        let lo = reconstruct(&f, ComponentRange::new(0, cut)).unwrap();
        let hi = reconstruct(&f, ComponentRange::new(cut, k)).unwrap();
        let sum = lo.add(&hi).unwrap();
        prop_assert!(sum.sub(&w).unwrap().frobenius() <= 1e-10 * w.frobenius().max(1e-300));
    }

    #[test]
    fn scaling_scales_singular_values(w in matrix(10), c in 0.01f64..100.0) {
        let a = svd(&w).unwrap();
        let b = svd(&w.scale(c)).unwrap();
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            prop_assert!((c * x - y).abs() <= 1e-12 * c * a.sigma[0].max(1e-300));
        }
    }
}

#[test]
fn sign_convention_makes_largest_entry_positive() {
    let w = Matrix::from_rows(&[&[-3.0, 0.0], &[0.0, -1.0], &[0.5, 0.2]]).unwrap();
    let f = svd(&w).unwrap();
    for i in 0..f.k() {
        let u = f.u_col(i);
        let big = u.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        assert!(big > 0.0);
    }
}
