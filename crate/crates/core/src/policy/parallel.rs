//! Critical secret pairs and the parallel-composition decomposition check.

use std::collections::BTreeSet;

use super::neighbors::SecretPair;
use super::{ConstraintKind, Policy};
use crate::error::{Error, Result};

/// Value pairs `(x, y)` on graph edges that are critical to query `q` for
/// some tuple: a database with the tuple at `x` satisfies `q`, and moving
/// that tuple alone to `y` breaks it.
fn critical_value_pairs(policy: &Policy, q: usize, population: usize) -> Result<Vec<(usize, usize)>> {
    let query = &policy.constraints().queries()[q];
    let Some(answer) = query.answer() else {
        return Ok(Vec::new());
    };
    if population == 0 {
        return Ok(Vec::new());
    }
    let domain = policy.domain();
    let phi: Vec<bool> = (0..domain.size()).map(|r| query.matches(&domain.coords(r))).collect();
    // The other tuples can take any values, and both a satisfying and a
    // non-satisfying value exist whenever x and y disagree on phi, so the
    // remaining count is reachable iff it lies in [0, n - 1].
    let witness = |x: usize| {
        let rest = answer as i128 - phi[x] as i128;
        rest >= 0 && rest < population as i128
    };
    let mut out = Vec::new();
    policy.graph().for_each_edge(domain, |x, y| {
        if phi[x] != phi[y] && witness(x) {
            out.push((x, y));
        }
    })?;
    out.sort_unstable();
    Ok(out)
}

/// `crit(q)` over a population of ids `0..population`.
pub fn critical_pairs(policy: &Policy, q: usize, population: usize) -> Result<Vec<SecretPair>> {
    if q >= policy.constraints().len() {
        return Err(Error::InvalidQuery(format!("no constraint with index {q}")));
    }
    let values = critical_value_pairs(policy, q, population)?;
    Ok((0..population as u64)
        .flat_map(|id| values.iter().map(move |&(x, y)| SecretPair { id, x, y }))
        .collect())
}

/// Whether the constraints split into groups that each only affect one of
/// the disjoint id sets in `subsets`.
pub fn check_parallel_decomposition(policy: &Policy, subsets: &[Vec<u64>], population: usize) -> Result<bool> {
    let mut seen = BTreeSet::new();
    for s in subsets {
        for &id in s {
            if id as usize >= population {
                return Err(Error::InvalidPolicy(format!("id {id} outside population of {population}")));
            }
            if !seen.insert(id) {
                return Err(Error::InvalidPolicy(format!("id {id} appears in two subsets")));
            }
        }
    }
    if matches!(policy.constraints().kind(), ConstraintKind::None | ConstraintKind::CardinalityOnly) {
        return Ok(true);
    }

    for q in 0..policy.constraints().len() {
        let crit = critical_pairs(policy, q, population)?;
        let crit_ids: BTreeSet<u64> = crit.iter().map(|p| p.id).collect();
        let affected = subsets
            .iter()
            .filter(|s| s.iter().any(|id| crit_ids.contains(id)))
            .count();
        if affected > 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttributeSpec, DomainSpec};
    use crate::policy::{ConstraintSet, CountQuery, SecretGraph};

    #[test]
    fn disconnected_components_with_component_counts() {
        let d = DomainSpec::line("x", 4).unwrap();
        let g = SecretGraph::partition(vec![0, 0, 1, 1]);
        let q_s = CountQuery::new(&d, vec![Some(vec![0, 1])], Some(2)).unwrap();
        let q_rest = CountQuery::new(&d, vec![Some(vec![2, 3])], Some(2)).unwrap();
        let p = Policy::new(d, g, ConstraintSet::new(vec![q_s, q_rest])).unwrap();
        assert!(critical_pairs(&p, 0, 4).unwrap().is_empty());
        assert!(critical_pairs(&p, 1, 4).unwrap().is_empty());
        assert!(check_parallel_decomposition(&p, &[vec![0, 1], vec![2, 3]], 4).unwrap());
    }

    #[test]
    fn known_marginal_blocks_parallel_composition() {
        let d = DomainSpec::new(vec![
            AttributeSpec::new("gender", &["m", "f"]),
            AttributeSpec::ordinal("age", 3),
        ])
        .unwrap();
        let q = ConstraintSet::marginal(&d, &[0], Some(&[2, 2])).unwrap();
        let p = Policy::new(d, SecretGraph::Full, q).unwrap();
        assert!(!critical_pairs(&p, 0, 4).unwrap().is_empty());
        assert!(!check_parallel_decomposition(&p, &[vec![0, 1], vec![2, 3]], 4).unwrap());
        assert!(check_parallel_decomposition(&p, &[vec![0, 1, 2, 3]], 4).unwrap());
    }

    #[test]
    fn cardinality_constraint_always_decomposes() {
        let d = DomainSpec::line("x", 3).unwrap();
        let q = CountQuery::cardinality(&d, Some(4));
        let p = Policy::new(d, SecretGraph::Full, ConstraintSet::new(vec![q])).unwrap();
        assert!(check_parallel_decomposition(&p, &[vec![0], vec![1], vec![2, 3]], 4).unwrap());
    }

    #[test]
    fn rejects_overlapping_subsets() {
        let d = DomainSpec::line("x", 3).unwrap();
        let p = Policy::unconstrained(d, SecretGraph::Full).unwrap();
        assert!(check_parallel_decomposition(&p, &[vec![0, 1], vec![1]], 3).is_err());
        assert!(check_parallel_decomposition(&p, &[vec![7]], 3).is_err());
    }

    #[test]
    fn unreachable_answer_has_no_critical_pairs() {
        let d = DomainSpec::line("x", 3).unwrap();
        let q = CountQuery::new(&d, vec![Some(vec![0])], Some(0)).unwrap();
        let p = Policy::new(d, SecretGraph::Full, ConstraintSet::new(vec![q])).unwrap();
        let crit = critical_pairs(&p, 0, 2).unwrap();
        assert!(crit.iter().all(|c| c.x != 0));
        assert!(!crit.is_empty());
    }
}
