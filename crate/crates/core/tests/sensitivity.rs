use proptest::prelude::*;

use blowfish_core::domain::{AttributeSpec, DomainSpec};
use blowfish_core::policy::{ConstraintSet, CountQuery, DatabaseSpace, Policy, SecretGraph, DEFAULT_BUDGET};
use blowfish_core::sensitivity::{
    brute_force_sensitivity, closed_form_sensitivity, histogram_sensitivity, is_sparse,
    sparse_constraint_sensitivity, sparse_sensitivity_certified, specialized_constraint_sensitivity, Exactness,
    Method, QueryKind,
};

fn histogram_brute(p: &Policy, n: usize) -> f64 {
    brute_force_sensitivity(&QueryKind::CompleteHistogram, p, n, DEFAULT_BUDGET).unwrap().value
}

fn satisfiable(p: &Policy, n: usize) -> bool {
    DatabaseSpace::new(p, n, DEFAULT_BUDGET).is_ok()
}

fn small_domain() -> impl Strategy<Value = DomainSpec> {
    prop::sample::select(vec![vec![2, 2], vec![3, 2], vec![2, 3], vec![2, 2, 2], vec![3, 2, 2], vec![4, 3], vec![5]])
        .prop_map(|cards| {
            DomainSpec::new(
                cards
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| AttributeSpec::ordinal(format!("a{i}"), c))
                    .collect(),
            )
            .unwrap()
        })
}

fn histogram_of(cells: usize, assignment: &[usize]) -> Vec<u64> {
    let mut counts = vec![0u64; cells];
    for &c in assignment {
        counts[c % cells] += 1;
    }
    counts
}

/// Count constraints on single attributes with random answers.
fn sparse_candidates() -> impl Strategy<Value = (Policy, usize)> {
    small_domain()
        .prop_flat_map(|d| {
            let cards = d.cardinalities();
            let query = (0..cards.len())
                .prop_flat_map(move |a| (Just(a), prop::collection::btree_set(0..cards[a], 1..cards[a].max(2))))
                .prop_flat_map(|(a, set)| (Just(a), Just(set), 0u64..3));
            let graph = prop_oneof![
                Just(SecretGraph::Full),
                Just(SecretGraph::Attribute),
                (1u64..3).prop_map(SecretGraph::distance),
            ];
            (Just(d), graph, prop::collection::vec(query, 1..4), 1usize..4)
        })
        .prop_filter_map("sparse and satisfiable", |(d, g, qs, n)| {
            let queries = qs
                .into_iter()
                .map(|(a, set, answer)| {
                    let mut pred = vec![None; d.num_attributes()];
                    pred[a] = Some(set.into_iter().collect());
                    CountQuery::new(&d, pred, Some(answer)).unwrap()
                })
                .collect();
            let qs = ConstraintSet::new(queries);
            if !is_sparse(&qs, &g, &d).ok()? {
                return None;
            }
            let p = Policy::new(d, g, qs).ok()?;
            satisfiable(&p, n).then_some((p, n))
        })
}

fn single_marginal() -> impl Strategy<Value = (Policy, usize)> {
    small_domain()
        .prop_filter("needs two attributes", |d| d.num_attributes() >= 2)
        .prop_flat_map(|d| {
            let k = d.num_attributes();
            (Just(d), prop::collection::btree_set(0..k, 1..k), prop::collection::vec(0usize..64, 1..4))
        })
        .prop_map(|(d, attrs, assignment)| {
            let attrs: Vec<usize> = attrs.into_iter().collect();
            let cells: usize = attrs.iter().map(|&a| d.cardinalities()[a]).product();
            let answers = histogram_of(cells, &assignment);
            let qs = ConstraintSet::marginal(&d, &attrs, Some(&answers)).unwrap();
            (Policy::new(d, SecretGraph::Full, qs).unwrap(), assignment.len())
        })
}

fn disjoint_marginals() -> impl Strategy<Value = (Policy, usize)> {
    small_domain()
        .prop_filter("needs three attributes", |d| d.num_attributes() >= 3)
        .prop_flat_map(|d| (Just(d), prop::collection::vec(0usize..64, 1..4)))
        .prop_map(|(d, assignment)| {
            let n = assignment.len();
            let c0 = d.cardinalities()[0];
            let c1 = d.cardinalities()[1];
            let mut qs = ConstraintSet::marginal(&d, &[0], Some(&histogram_of(c0, &assignment))).unwrap();
            let shifted: Vec<usize> = assignment.iter().map(|a| a / 7).collect();
            qs.extend(ConstraintSet::marginal(&d, &[1], Some(&histogram_of(c1, &shifted))).unwrap());
            (Policy::new(d, SecretGraph::Attribute, qs).unwrap(), n)
        })
}

fn rectangles() -> impl Strategy<Value = (Policy, usize)> {
    let rect = (0usize..3, 0usize..2, 0usize..4, 0usize..2, 0u64..2);
    (prop::collection::vec(rect, 1..4), 1u64..3, 1usize..4).prop_filter_map(
        "disjoint and satisfiable",
        |(raw, theta, n)| {
            let d = DomainSpec::new(vec![AttributeSpec::ordinal("r", 3), AttributeSpec::ordinal("c", 4)]).unwrap();
            let boxes: Vec<((usize, usize), (usize, usize), u64)> = raw
                .into_iter()
                .map(|(r, h, c, w, a)| ((r, (r + h).min(2)), (c, (c + w).min(3)), a))
                .collect();
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    let (a, b) = (&boxes[i], &boxes[j]);
                    if a.0 .0 <= b.0 .1 && b.0 .0 <= a.0 .1 && a.1 .0 <= b.1 .1 && b.1 .0 <= a.1 .1 {
                        return None;
                    }
                }
            }
            let qs = boxes
                .iter()
                .map(|&(r, c, a)| CountQuery::rectangle(&d, &[r, c], Some(a)).unwrap())
                .collect();
            let p = Policy::new(d, SecretGraph::distance(theta), ConstraintSet::new(qs)).ok()?;
            satisfiable(&p, n).then_some((p, n))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sparse_engine_bounds_brute_force((p, n) in sparse_candidates()) {
        let s = sparse_constraint_sensitivity(&p).unwrap();
        let brute = histogram_brute(&p, n);
        prop_assert!(brute <= s.value, "brute {} > engine {}", brute, s.value);
        prop_assert!(s.value <= 2.0 * (p.constraints().len() as f64 + 1.0));
        prop_assert_eq!(s.exactness, Exactness::UpperBound);
        let certified = sparse_sensitivity_certified(&p, n, DEFAULT_BUDGET).unwrap();
        if certified.exactness == Exactness::Exact {
            prop_assert_eq!(certified.value, brute);
        }
    }

    #[test]
    fn marginal_specialization_agrees((p, n) in single_marginal()) {
        let spec = specialized_constraint_sensitivity(&p).unwrap();
        prop_assert_eq!(spec.value, sparse_constraint_sensitivity(&p).unwrap().value);
        let brute = histogram_brute(&p, n);
        prop_assert!(brute <= spec.value);
        if spec.exactness == Exactness::Exact {
            prop_assert_eq!(brute, spec.value);
        }
    }

    #[test]
    fn disjoint_marginal_specialization_agrees((p, n) in disjoint_marginals()) {
        let spec = specialized_constraint_sensitivity(&p).unwrap();
        prop_assert_eq!(spec.value, sparse_constraint_sensitivity(&p).unwrap().value);
        let brute = histogram_brute(&p, n);
        prop_assert!(brute <= spec.value);
        if spec.exactness == Exactness::Exact {
            prop_assert_eq!(brute, spec.value);
        }
    }

    #[test]
    fn rectangle_specialization_is_sound((p, n) in rectangles()) {
        let spec = specialized_constraint_sensitivity(&p).unwrap();
        let brute = histogram_brute(&p, n);
        prop_assert!(brute <= spec.value, "brute {} > specialized {}", brute, spec.value);
    }
}

#[test]
fn two_per_query_cap_counterexample() {
    // One known count on {1, 2}: moving one tuple out of the set and another
    // into it from outside is a minimal two-tuple move.
    let d = DomainSpec::line("x", 4).unwrap();
    let q = CountQuery::new(&d, vec![Some(vec![1, 2])], Some(1)).unwrap();
    let p = Policy::new(d, SecretGraph::Full, ConstraintSet::new(vec![q])).unwrap();
    let brute = histogram_brute(&p, 2);
    let engine = sparse_constraint_sensitivity(&p).unwrap();
    assert_eq!(brute, 4.0);
    assert_eq!(engine.value, 4.0);
    assert!(brute > 2.0 * (p.constraints().len().max(1) as f64));
}

#[test]
fn kmeans_sum_closed_form_misses_cluster_switches() {
    let p = Policy::unconstrained(DomainSpec::line("x", 5).unwrap(), SecretGraph::distance(1)).unwrap();
    let q = QueryKind::KmeansSum { k: 2 };
    let closed = closed_form_sensitivity(&q, &p).unwrap().value;
    let brute = brute_force_sensitivity(&q, &p, 1, DEFAULT_BUDGET).unwrap().value;
    assert_eq!((closed, brute), (2.0, 7.0));
}

#[test]
fn dispatcher_paths() {
    let d = DomainSpec::line("x", 6).unwrap();
    let free = Policy::unconstrained(d.clone(), SecretGraph::distance(2)).unwrap();
    assert_eq!(histogram_sensitivity(&free).unwrap().method, Method::ClosedForm);
    let nested = ConstraintSet::new(vec![
        CountQuery::new(&d, vec![Some(vec![1, 2])], Some(1)).unwrap(),
        CountQuery::new(&d, vec![Some(vec![2])], Some(1)).unwrap(),
    ]);
    let p = Policy::new(d, SecretGraph::Full, nested).unwrap();
    assert!(histogram_sensitivity(&p).is_err());
}
