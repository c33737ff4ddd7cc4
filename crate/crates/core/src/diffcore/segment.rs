//! Ragged reductions keyed by a per-row segment id.
//!
//! These are the eager kernels; [`Tape`](super::Tape) records the same
//! operations with their backward rules.

use crate::error::{Error, Result};

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReduceMode {
    Sum,
    Mean,
    Max,
}

impl ReduceMode {
    pub const ALL: [ReduceMode; 3] = [ReduceMode::Sum, ReduceMode::Mean, ReduceMode::Max];
}

pub(crate) fn check_segments(len: usize, segment_ids: &[usize], n_segments: usize, ctx: &str) -> Result<()> {
    if segment_ids.len() != len {
        return Err(Error::dim(
            ctx,
            format!("{len} rows but {} segment ids", segment_ids.len()),
        ));
    }
    if let Some(&bad) = segment_ids.iter().find(|&&s| s >= n_segments) {
        return Err(Error::Index {
            context: ctx.to_string(),
            index: bad,
            limit: n_segments,
        });
    }
    Ok(())
}

/// Number of rows in each segment.
pub fn segment_counts(segment_ids: &[usize], n_segments: usize) -> Vec<usize> {
    let mut counts = vec![0; n_segments];
    for &s in segment_ids {
        counts[s] += 1;
    }
    counts
}

/// Reduces the rows of `values` (`[E×d]`) into `n_segments` rows.
///
/// Empty segments produce a zero row in every mode, including `Max`.
pub fn segment_reduce(
    values: &Tensor,
    segment_ids: &[usize],
    n_segments: usize,
    mode: ReduceMode,
) -> Result<Tensor> {
    let (rows, _) = values.dims2();
    check_segments(rows, segment_ids, n_segments, "segment_reduce")?;
    Ok(segment_reduce_unchecked(values, segment_ids, n_segments, mode).0)
}

/// Returns the reduction plus, for `Max`, the winning row per output element.
pub(crate) fn segment_reduce_unchecked(
    values: &Tensor,
    segment_ids: &[usize],
    n_segments: usize,
    mode: ReduceMode,
) -> (Tensor, Vec<usize>) {
    let d = values.cols();
    let mut out = vec![0.0; n_segments * d];
    let mut argmax = Vec::new();
    match mode {
        ReduceMode::Sum | ReduceMode::Mean => {
            for (e, &s) in segment_ids.iter().enumerate() {
                let src = values.row(e);
                for (o, &v) in out[s * d..(s + 1) * d].iter_mut().zip(src) {
                    *o += v;
                }
            }
            if mode == ReduceMode::Mean {
                let counts = segment_counts(segment_ids, n_segments);
                for (s, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        for o in &mut out[s * d..(s + 1) * d] {
                            *o /= c as f64;
                        }
                    }
                }
            }
        }
        ReduceMode::Max => {
            // usize::MAX marks an empty segment.
            argmax = vec![usize::MAX; n_segments * d];
            for (e, &s) in segment_ids.iter().enumerate() {
                let src = values.row(e);
                for k in 0..d {
                    let slot = s * d + k;
                    if argmax[slot] == usize::MAX || src[k] > out[slot] {
                        out[slot] = src[k];
                        argmax[slot] = e;
                    }
                }
            }
        }
    }
    (Tensor::matrix(n_segments, d, out), argmax)
}

/// Softmax over the entries of `logits` sharing a segment id.
///
/// Each segment is shifted by its own maximum before exponentiation, so
/// logits of any finite magnitude are safe.
pub fn segment_softmax(logits: &Tensor, segment_ids: &[usize], n_segments: usize) -> Result<Tensor> {
    check_segments(logits.numel(), segment_ids, n_segments, "segment_softmax")?;
    Ok(segment_softmax_unchecked(logits, segment_ids, n_segments))
}

pub(crate) fn segment_softmax_unchecked(logits: &Tensor, segment_ids: &[usize], n_segments: usize) -> Tensor {
    let z = logits.data();
    let mut max = vec![f64::NEG_INFINITY; n_segments];
    for (e, &s) in segment_ids.iter().enumerate() {
        max[s] = max[s].max(z[e]);
    }
    let mut out: Vec<f64> = segment_ids
        .iter()
        .enumerate()
        .map(|(e, &s)| (z[e] - max[s]).exp())
        .collect();
    let mut denom = vec![0.0; n_segments];
    for (e, &s) in segment_ids.iter().enumerate() {
        denom[s] += out[e];
    }
    for (e, &s) in segment_ids.iter().enumerate() {
        out[e] /= denom[s];
    }
    Tensor::new(logits.shape().to_vec(), out).expect("same shape as logits")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_rows() -> Tensor {
        Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0])
    }

    #[test]
    fn sum_mean_max_of_two_rows() {
        let v = two_rows();
        let sum = segment_reduce(&v, &[0, 0], 1, ReduceMode::Sum).unwrap();
        let mean = segment_reduce(&v, &[0, 0], 1, ReduceMode::Mean).unwrap();
        let max = segment_reduce(&v, &[0, 0], 1, ReduceMode::Max).unwrap();
        assert_eq!(sum.data(), &[4.0, 6.0]);
        assert_eq!(mean.data(), &[2.0, 3.0]);
        assert_eq!(max.data(), &[3.0, 4.0]);
    }

    #[test]
    fn empty_segment_is_zero_in_every_mode() {
        let v = Tensor::matrix(1, 2, vec![-5.0, -7.0]);
        for mode in ReduceMode::ALL {
            let out = segment_reduce(&v, &[1], 3, mode).unwrap();
            assert_eq!(out.row(0), &[0.0, 0.0]);
            assert_eq!(out.row(2), &[0.0, 0.0]);
            assert_eq!(out.row(1), &[-5.0, -7.0]);
        }
    }

    #[test]
    fn out_of_range_segment_is_index_error() {
        let err = segment_reduce(&two_rows(), &[0, 2], 2, ReduceMode::Sum).unwrap_err();
        assert!(matches!(err, Error::Index { index: 2, limit: 2, .. }));
    }

    #[test]
    fn matches_brute_force_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (e, n, d) = (100, 10, 4);
        let vals: Vec<f64> = (0..e * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ids: Vec<usize> = (0..e).map(|_| rng.random_range(0..n)).collect();
        let v = Tensor::matrix(e, d, vals.clone());
        for mode in ReduceMode::ALL {
            let got = segment_reduce(&v, &ids, n, mode).unwrap();
            for node in 0..n {
                for k in 0..d {
                    let members: Vec<f64> = (0..e).filter(|&r| ids[r] == node).map(|r| vals[r * d + k]).collect();
                    let want = if members.is_empty() {
                        0.0
                    } else {
                        match mode {
                            ReduceMode::Sum => members.iter().sum(),
                            ReduceMode::Mean => members.iter().sum::<f64>() / members.len() as f64,
                            ReduceMode::Max => members.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        }
                    };
                    assert_eq!(got.get(node, k), want, "{mode:?} node {node} col {k}");
                }
            }
        }
    }

    #[test]
    fn softmax_small_cases() {
        let one = segment_softmax(&Tensor::vector(vec![3.7]), &[0], 1).unwrap();
        assert_eq!(one.data(), &[1.0]);
        let pair = segment_softmax(&Tensor::vector(vec![2.0, 2.0]), &[0, 0], 1).unwrap();
        assert_eq!(pair.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let out = segment_softmax(&Tensor::vector(vec![1000.0, 1001.0]), &[0, 0], 1).unwrap();
        // exp(1) / (1 + exp(1)) computed by hand
        let e = std::f64::consts::E;
        let hi = e / (1.0 + e);
        assert!((out.data()[1] - hi).abs() < 1e-15);
        assert!((out.data()[0] - (1.0 - hi)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sum_is_permutation_invariant(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (e, n, d) = (30, 6, 3);
            // integer-valued entries keep float addition exact under reordering
            let vals: Vec<f64> = (0..e * d).map(|_| rng.random_range(-50i32..50) as f64).collect();
            let ids: Vec<usize> = (0..e).map(|_| rng.random_range(0..n)).collect();
            let mut perm: Vec<usize> = (0..e).collect();
            for i in (1..e).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let v = Tensor::matrix(e, d, vals);
            let pv = v.select_rows(&perm);
            let pids: Vec<usize> = perm.iter().map(|&p| ids[p]).collect();
            for mode in ReduceMode::ALL {
                let a = segment_reduce(&v, &ids, n, mode).unwrap();
                let b = segment_reduce(&pv, &pids, n, mode).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn softmax_segments_sum_to_one(logits in proptest::collection::vec(-1.0e4f64..1.0e4, 1..40), n in 1usize..6) {
            let ids: Vec<usize> = (0..logits.len()).map(|i| (i * 7 + 3) % n).collect();
            let out = segment_softmax(&Tensor::vector(logits), &ids, n).unwrap();
            let mut sums = vec![0.0; n];
            let mut seen = vec![false; n];
            for (e, &s) in ids.iter().enumerate() {
                prop_assert!(out.data()[e] >= 0.0 && out.data()[e].is_finite());
                sums[s] += out.data()[e];
                seen[s] = true;
            }
            for s in 0..n {
                if seen[s] {
                    prop_assert!((sums[s] - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
