use pavlov_core::kernels::{
    causal_softmax_weights, hebbian_accumulate, linear_attention_batch,
    linear_attention_recurrent_matrix, retrieve, softmax_attention_reference,
};
use pavlov_core::sampling::{fill_normal, stream_rng};
use pavlov_core::{ActivationKind, AssociativeState, DenseMatrix, HeadConfig, NormKind, RowVector};
use proptest::prelude::*;

fn normal_matrix(rows: usize, cols: usize, seed: u64, tag: u64) -> DenseMatrix {
    let mut rng = stream_rng(seed, &[tag]);
    let mut data = vec![0.0; rows * cols];
    fill_normal(&mut rng, &mut data, 1.0);
    DenseMatrix::new(rows, cols, data).unwrap()
}

fn qkv(n: usize, d_k: usize, d_v: usize, seed: u64) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    (
        normal_matrix(n, d_k, seed, 1),
        normal_matrix(n, d_k, seed, 2),
        normal_matrix(n, d_v, seed, 3),
    )
}

const NORMS: [NormKind; 4] = [
    NormKind::None,
    NormKind::Rms,
    NormKind::Layer,
    NormKind::Denominator,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batch_and_recurrent_agree(n in 1usize..24, d_k in 1usize..12, d_v in 1usize..12, seed in any::<u64>()) {
        let (q, k, v) = qkv(n, d_k, d_v, seed);
        for norm in NORMS {
            let b = linear_attention_batch(&q, &k, &v, ActivationKind::EluPlusOne, norm).unwrap().output;
            let r = linear_attention_recurrent_matrix(&q, &k, &v, ActivationKind::EluPlusOne, norm).unwrap().output;
            prop_assert!(r.max_rel_deviation(&b).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn retrieval_is_linear_in_the_query(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (q, k, v) = qkv(6, 5, 4, seed);
        let cfg = HeadConfig::plain();
        let s = hebbian_accumulate(k.cols(), v.cols(), &k.row_vectors(), &v.row_vectors(), &cfg).unwrap();
        let q1 = q.row_vector(0);
        let q2 = q.row_vector(1);
        let mixed = q1.scale(a).add(&q2.scale(b)).unwrap();
        let lhs = retrieve(&mixed, &s, &cfg).unwrap();
        let rhs = retrieve(&q1, &s, &cfg).unwrap().scale(a)
            .add(&retrieve(&q2, &s, &cfg).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10);
    }
}

#[test]
fn future_tokens_do_not_leak() {
    let (q, k, v) = qkv(10, 6, 5, 3);
    let base = linear_attention_batch(&q, &k, &v, ActivationKind::EluPlusOne, NormKind::Rms)
        .unwrap()
        .output;
    let soft = softmax_attention_reference(&q, &k, &v).unwrap();
    // Perturb the last four tokens only.
    let mut k2 = k.as_slice().to_vec();
    let mut v2 = v.as_slice().to_vec();
    k2[6 * 6..].iter_mut().for_each(|x| *x += 7.0);
    v2[6 * 5..].iter_mut().for_each(|x| *x -= 3.0);
    let k2 = DenseMatrix::new(10, 6, k2).unwrap();
    let v2 = DenseMatrix::new(10, 5, v2).unwrap();
    let pert = linear_attention_batch(&q, &k2, &v2, ActivationKind::EluPlusOne, NormKind::Rms)
        .unwrap()
        .output;
    let soft2 = softmax_attention_reference(&q, &k2, &v2).unwrap();
    for i in 0..6 {
        assert_eq!(base.row(i), pert.row(i), "linear row {i}");
        assert_eq!(soft.row(i), soft2.row(i), "softmax row {i}");
    }
    assert_ne!(base.row(6), pert.row(6));
}

#[test]
fn softmax_rows_are_causal_distributions() {
    let (q, k, v) = qkv(12, 8, 3, 11);
    let w = causal_softmax_weights(&q, &k).unwrap();
    for i in 0..12 {
        let row = w.row(i);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row[..=i].iter().all(|x| *x > 0.0));
        assert!(row[i + 1..].iter().all(|x| *x == 0.0));
    }
    // Outputs are convex combinations of the visible values.
    let out = softmax_attention_reference(&q, &k, &v).unwrap();
    for i in 0..12 {
        for c in 0..3 {
            let seen = (0..=i).map(|j| v.get(j, c));
            let lo = seen.clone().fold(f64::INFINITY, f64::min);
            let hi = seen.fold(f64::NEG_INFINITY, f64::max);
            assert!(out.get(i, c) >= lo - 1e-12 && out.get(i, c) <= hi + 1e-12);
        }
    }
}

#[test]
fn hebbian_state_equals_keys_transpose_values() {
    let (_, k, v) = qkv(7, 4, 3, 5);
    let s = hebbian_accumulate(
        4,
        3,
        &k.row_vectors(),
        &v.row_vectors(),
        &HeadConfig::plain(),
    )
    .unwrap();
    let expected = k.transpose().matmul(&v).unwrap();
    assert!(s.matrix().max_abs_diff(&expected).unwrap() < 1e-12);
    assert_eq!(s.step_index(), 7);
}

#[test]
fn associate_one_pair_at_a_time_matches_bulk() {
    let (_, k, v) = qkv(5, 3, 2, 9);
    let cfg = HeadConfig::plain();
    let mut st = AssociativeState::new(3, 2).unwrap();
    for (a, b) in k.row_vectors().iter().zip(v.row_vectors().iter()) {
        st.associate(a, b, &cfg).unwrap();
    }
    let bulk =
        hebbian_accumulate(k.cols(), v.cols(), &k.row_vectors(), &v.row_vectors(), &cfg).unwrap();
    assert!(st.matrix().max_abs_diff(bulk.matrix()).unwrap() < 1e-14);
    let q = RowVector::from_slice(&[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(
        retrieve(&q, &st, &cfg).unwrap().as_slice(),
        st.matrix().row(0)
    );
}
