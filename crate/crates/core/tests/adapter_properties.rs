use nalgebra::DMatrix;
use proptest::prelude::*;
use soma_core::adapter::{count_trainable, lora_init, pissa_init, soma_init};
use soma_core::linalg::{svd, Matrix};
use soma_core::{AdapterKind, LinearAdapter};

fn matrix() -> impl Strategy<Value = Matrix> {
    (2usize..14, 2usize..14).prop_flat_map(|(m, n)| {
        proptest::collection::vec(-2.0f64..2.0, m * n).prop_map(move |d| Matrix::from_vec(m, n, d).unwrap())
    })
}

fn with_rank() -> impl Strategy<Value = (Matrix, usize)> {
    matrix().prop_flat_map(|w| {
        let k = w.rows().min(w.cols());
        (Just(w), 1..=k)
    })
}

/// Cosines of the principal angles between the column spaces of two
/// orthonormal-basis matrices.
fn principal_cosines(a: &Matrix, b: &Matrix) -> Vec<f64> {
    let c = a.t_matmul(b).unwrap();
    let na = DMatrix::from_row_slice(c.rows(), c.cols(), c.as_slice());
    na.singular_values().iter().copied().collect()
}

/// Orthonormal basis of the column space of `m` (full column rank assumed).
fn orthonormal_basis(m: &Matrix) -> Matrix {
    let na = DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let q = na.qr().q();
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out[(r, c)] = q[(r, c)];
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_kind_reproduces_w_at_init((w, r) in with_rank(), seed in any::<u64>(), scale in 0.25f64..4.0) {
        for kind in [AdapterKind::Soma, AdapterKind::Pissa, AdapterKind::Lora] {
            let ad = LinearAdapter::new(kind, &w, r, seed, scale).unwrap();
            let err = ad.merge().w.sub(&w).unwrap().max_abs();
            prop_assert!(err <= 1e-12 * w.max_abs().max(1.0), "{:?}: {}", kind, err);
            prop_assert_eq!(ad.delta().max_abs(), 0.0);
            prop_assert_eq!(ad.trainable_params(), r * (w.rows() + w.cols()));
        }
    }

    #[test]
    fn soma_spans_the_minor_subspace((w, r) in with_rank()) {
        let f = svd(&w).unwrap();
        let k = f.k();
        // Only meaningful when the minor block is separated from the rest.
        let gap = if r < k { f.sigma[k - r - 1] - f.sigma[k - r] } else { 1.0 };
        prop_assume!(gap > 1e-3 && f.sigma[k - 1] > 1e-3);
        let ad = soma_init(&w, r).unwrap();
        let oracle = {
            let na = DMatrix::from_row_slice(w.rows(), w.cols(), w.as_slice()).svd(true, false);
            let u = na.u.unwrap();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| na.singular_values[b].total_cmp(&na.singular_values[a]));
            Matrix::from_fn(w.rows(), r, |i, j| u[(i, order[k - r + j])])
        };
        for c in principal_cosines(&orthonormal_basis(ad.b()), &oracle) {
            prop_assert!((c - 1.0).abs() < 1e-8, "cosine {}", c);
        }
    }

    #[test]
    fn soma_and_pissa_factors_are_orthogonal((w, r) in with_rank()) {
        let k = w.rows().min(w.cols());
        prop_assume!(2 * r <= k);
        let f = svd(&w).unwrap();
        prop_assume!(f.sigma[k - r] > 1e-6);
        let s = soma_init(&w, r).unwrap();
        let p = pissa_init(&w, r).unwrap();
        let cross = s.b().t_matmul(p.b()).unwrap().max_abs();
        prop_assert!(cross < 1e-10 * f.sigma[0].max(1.0), "{}", cross);
        let cross = s.a().matmul_t(p.a()).unwrap().max_abs();
        prop_assert!(cross < 1e-10 * f.sigma[0].max(1.0), "{}", cross);
    }

    #[test]
    fn soma_factor_gram_is_the_minor_spectrum((w, r) in with_rank()) {
        let f = svd(&w).unwrap();
        let k = f.k();
        let ad = soma_init(&w, r).unwrap();
        let gram = ad.b().t_matmul(ad.b()).unwrap();
        for i in 0..r {
            for j in 0..r {
                let expect = if i == j { f.sigma[k - r + i] } else { 0.0 };
                prop_assert!((gram[(i, j)] - expect).abs() < 1e-10 * f.sigma[0].max(1.0));
            }
        }
    }

    #[test]
    fn lora_b_is_zero_and_a_is_bounded((w, r) in with_rank(), seed in any::<u64>()) {
        let ad = lora_init(&w, r, seed).unwrap();
        prop_assert_eq!(ad.b().max_abs(), 0.0);
        let bound = (6.0 / w.cols() as f64).sqrt();
        prop_assert!(ad.a().max_abs() <= bound);
        prop_assert_eq!(ad.w_res(), &w);
    }

    #[test]
    fn forward_equals_merged_product((w, r) in with_rank(), cols in 1usize..5, seed in any::<u64>()) {
        let mut ad = LinearAdapter::new(AdapterKind::Soma, &w, r, seed, 1.5).unwrap();
        ad.b_mut().as_mut_slice().iter_mut().enumerate().for_each(|(i, v)| *v += 0.01 * i as f64);
        let x = Matrix::from_fn(w.cols(), cols, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y = ad.forward(&x).unwrap();
        let z = ad.merge().w.matmul(&x).unwrap();
        prop_assert!(y.sub(&z).unwrap().max_abs() <= 1e-12 * z.max_abs().max(1.0));
    }

    #[test]
    fn count_is_linear_in_rank(shapes in proptest::collection::vec((1usize..100, 1usize..100), 1..8), r in 1usize..50) {
        let one = count_trainable(&shapes, 1);
        prop_assert_eq!(count_trainable(&shapes, r), r * one);
    }
}
