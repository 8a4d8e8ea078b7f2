//! Property tests for the scoring, quantile, and graph invariants that the
//! rest of the crate relies on.

use got::runner::quantile;
use got::scoring::{
    intersection_error_scope, keyword_error, merge_quality, sorting_error_scope,
};
use got::thought_graph::{EdgeKind, GraphDelta, ReasoningState, Thought, ThoughtId};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn counts(pairs: Vec<(String, i64)>) -> BTreeMap<String, i64> {
    pairs.into_iter().collect()
}

proptest! {
    /// A correctly sorted permutation of the input has zero error.
    #[test]
    fn sorted_copy_scores_zero(input in proptest::collection::vec(0i64..10, 0..64)) {
        let mut sorted = input.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorting_error_scope(&input, &sorted), 0);
    }

    /// Any response scores at least the number of adjacent inversions it
    /// contains, and an unchanged multiset contributes no histogram drift.
    #[test]
    fn shuffling_only_adds_error(input in proptest::collection::vec(0i64..10, 2..64)) {
        let mut reversed = input.clone();
        reversed.sort_unstable();
        reversed.reverse();
        let inversions = reversed.windows(2).filter(|w| w[0] > w[1]).count() as u64;
        prop_assert_eq!(sorting_error_scope(&input, &reversed), inversions);
    }

    /// The exact intersection of two lists scores zero.
    #[test]
    fn true_intersection_scores_zero(
        a in proptest::collection::vec(0i64..40, 0..32),
        b in proptest::collection::vec(0i64..40, 0..32),
    ) {
        use std::collections::BTreeSet;
        let sa: BTreeSet<i64> = a.iter().copied().collect();
        let truth: Vec<i64> = b
            .iter()
            .copied()
            .collect::<BTreeSet<i64>>()
            .into_iter()
            .filter(|x| sa.contains(x))
            .collect();
        prop_assert_eq!(intersection_error_scope(&a, &b, &truth), 0);
    }

    /// Keyword error is a metric: zero on identity, symmetric, and it obeys
    /// the triangle inequality.
    #[test]
    fn keyword_error_is_a_metric(
        x in proptest::collection::vec(("[A-D]", 0i64..6), 0..6),
        y in proptest::collection::vec(("[A-D]", 0i64..6), 0..6),
        z in proptest::collection::vec(("[A-D]", 0i64..6), 0..6),
    ) {
        let (x, y, z) = (counts(x), counts(y), counts(z));
        prop_assert_eq!(keyword_error(&x, &x), 0);
        prop_assert_eq!(keyword_error(&x, &y), keyword_error(&y, &x));
        prop_assert!(keyword_error(&x, &z) <= keyword_error(&x, &y) + keyword_error(&y, &z));
    }

    /// Merge quality stays inside the sampling range and between the two
    /// per-dimension means.
    #[test]
    fn merge_quality_bounds(
        r in proptest::collection::vec(0.0f64..=10.0, 1..8),
        t in proptest::collection::vec(0.0f64..=10.0, 1..8),
    ) {
        let q = merge_quality(&r, &t).unwrap();
        prop_assert!((0.0..=10.0).contains(&q));
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let (mr, mt) = (mean(&r), mean(&t));
        prop_assert!(q >= mr.min(mt) - 1e-9);
        prop_assert!(q <= mr.max(mt) + 1e-9);
    }

    /// Samples outside the score range are rejected rather than clamped.
    #[test]
    fn merge_quality_rejects_out_of_range(bad in prop_oneof![-100.0f64..0.0, 10.0f64..100.0]) {
        prop_assume!(bad != 10.0);
        prop_assert!(merge_quality(&[bad], &[5.0]).is_err());
    }

    /// Nearest-rank quantiles return an element of the sample and are
    /// monotone in q.
    #[test]
    fn quantile_is_nearest_rank(
        mut xs in proptest::collection::vec(-50.0f64..50.0, 1..40),
        q1 in 0.01f64..1.0,
        q2 in 0.01f64..1.0,
    ) {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = quantile(&xs, lo);
        let b = quantile(&xs, hi);
        prop_assert!(xs.contains(&a) && xs.contains(&b));
        prop_assert!(a <= b);
        prop_assert_eq!(quantile(&xs, 1.0), *xs.last().unwrap());
    }

    /// Volume and latency never decrease when a generate edge is appended,
    /// and the sink's volume counts every ancestor exactly once.
    #[test]
    fn chain_growth_is_monotone(len in 1usize..20) {
        let mut state = ReasoningState::new();
        let mut prev: Option<ThoughtId> = None;
        for i in 0..len {
            let id = state.allocate_id();
            state
                .apply_delta(&GraphDelta {
                    v_plus: vec![Thought {
                        id,
                        content: got::content::Content::Numbers(vec![]),
                        class: "step".into(),
                        score: None,
                        valid: None,
                        origin_op: None,
                        creation_index: id.0,
                        target: None,
                    }],
                    e_plus: prev
                        .map(|p| vec![(p, id, EdgeKind::Generate)])
                        .unwrap_or_default(),
                    ..Default::default()
                })
                .unwrap();
            prop_assert_eq!(state.volume(id).unwrap(), i);
            prop_assert_eq!(state.latency(id).unwrap(), i);
            prev = Some(id);
        }
    }
}

#[test]
fn merge_quality_of_all_zero_samples_is_zero() {
    assert_eq!(merge_quality(&[0.0, 0.0], &[0.0]).unwrap(), 0.0);
}
