//! Histogram sensitivity for three recognised constraint shapes: one
//! marginal under the full graph, disjoint marginals under the attribute
//! graph, and disjoint rectangles under a distance-threshold graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Exactness, Method, SensitivityResult};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::policy::{CountQuery, Policy, SecretGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// Marginal over `attrs`; `cells` lists query indices.
    SingleMarginal { attrs: Vec<usize>, cells: Vec<usize> },
    /// Marginals over pairwise disjoint attribute sets.
    DisjointMarginals { marginals: Vec<(Vec<usize>, Vec<usize>)> },
    /// Pairwise disjoint boxes, inclusive index bounds per attribute.
    DisjointRectangles { boxes: Vec<Vec<(usize, usize)>> },
}

/// Groups cell queries by attribute set, checking that each group is a
/// complete marginal over an attribute set that is a proper subset of the
/// domain's attributes.
fn marginal_groups(policy: &Policy) -> Option<Vec<(Vec<usize>, Vec<usize>)>> {
    let domain = policy.domain();
    let mut groups: BTreeMap<Vec<usize>, Vec<(Vec<usize>, usize)>> = BTreeMap::new();
    for (i, q) in policy.constraints().queries().iter().enumerate() {
        let attrs = q.constrained_attributes();
        let mut values = Vec::with_capacity(attrs.len());
        for &a in &attrs {
            match q.allowed()[a].as_deref() {
                Some([v]) => values.push(*v),
                _ => return None,
            }
        }
        groups.entry(attrs).or_default().push((values, i));
    }
    let mut out = Vec::new();
    for (attrs, cells) in groups {
        if attrs.is_empty() || attrs.len() == domain.num_attributes() {
            return None;
        }
        let size: usize = attrs.iter().map(|&a| domain.attributes()[a].cardinality()).product();
        let distinct: BTreeSet<&Vec<usize>> = cells.iter().map(|(v, _)| v).collect();
        if cells.len() != size || distinct.len() != size {
            return None;
        }
        out.push((attrs, cells.into_iter().map(|(_, i)| i).collect()));
    }
    Some(out)
}

fn box_gap(a: &[(usize, usize)], b: &[(usize, usize)]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&(l1, u1), &(l2, u2))| {
            if u1 < l2 {
                (l2 - u1) as u64
            } else if u2 < l1 {
                (l1 - u2) as u64
            } else {
                0
            }
        })
        .sum()
}

fn boxes_intersect(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
    a.iter().zip(b).all(|(&(l1, u1), &(l2, u2))| l1 <= u2 && l2 <= u1)
}

pub fn recognize_shape(policy: &Policy) -> Result<Shape> {
    let domain = policy.domain();
    let queries = policy.constraints().queries();
    if queries.is_empty() {
        return Err(Error::UnrecognizedShape("no constraints".into()));
    }
    match policy.graph() {
        SecretGraph::Full => match marginal_groups(policy) {
            Some(mut groups) if groups.len() == 1 => {
                let (attrs, cells) = groups.remove(0);
                Ok(Shape::SingleMarginal { attrs, cells })
            }
            _ => Err(Error::UnrecognizedShape(
                "full graph needs exactly one marginal over a proper attribute subset".into(),
            )),
        },
        SecretGraph::Attribute => {
            let groups = marginal_groups(policy).ok_or_else(|| {
                Error::UnrecognizedShape("attribute graph needs complete marginals".into())
            })?;
            let mut used = BTreeSet::new();
            for (attrs, _) in &groups {
                for a in attrs {
                    if !used.insert(*a) {
                        return Err(Error::UnrecognizedShape("marginals share an attribute".into()));
                    }
                }
            }
            Ok(Shape::DisjointMarginals { marginals: groups })
        }
        SecretGraph::DistanceThreshold { theta } if *theta > 0 => {
            let boxes = queries
                .iter()
                .map(|q| q.as_rectangle(domain))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::UnrecognizedShape("a constraint is not a rectangle".into()))?;
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    if boxes_intersect(&boxes[i], &boxes[j]) {
                        return Err(Error::UnrecognizedShape(format!("rectangles {i} and {j} overlap")));
                    }
                }
            }
            Ok(Shape::DisjointRectangles { boxes })
        }
        _ => Err(Error::UnrecognizedShape(format!(
            "no specialization for the {} graph",
            policy.graph().kind_name()
        ))),
    }
}

fn marginal_size(domain: &DomainSpec, attrs: &[usize]) -> usize {
    attrs.iter().map(|&a| domain.attributes()[a].cardinality()).product()
}

fn all_positive(queries: &[CountQuery], idx: &[usize]) -> bool {
    idx.iter().all(|&i| queries[i].answer().is_some_and(|a| a >= 1))
}

/// Sensitivity of the complete histogram for a recognised shape.
///
/// The value is always a valid upper bound. It is tagged `Exact` only when
/// the answers make the worst case reachable: every query answered, and every
/// query on the worst chain or cycle holding at least one tuple. Rectangle
/// shapes additionally need no point query, the largest component to be a
/// clique of rectangles, enough of its rectangles to have a free domain
/// point within the threshold. The rectangle case also assumes at least one
/// tuple lies outside every rectangle.
pub fn specialized_constraint_sensitivity(policy: &Policy) -> Result<SensitivityResult> {
    let domain = policy.domain();
    let queries = policy.constraints().queries();
    let all_answered = queries.iter().all(|q| q.answer().is_some());
    let (value, exact) = match recognize_shape(policy)? {
        Shape::SingleMarginal { attrs, cells } => {
            let size = marginal_size(domain, &attrs);
            let free_attr = (0..domain.num_attributes())
                .any(|a| !attrs.contains(&a) && domain.attributes()[a].cardinality() > 1);
            (2 * size, all_answered && free_attr && all_positive(queries, &cells))
        }
        Shape::DisjointMarginals { marginals } => {
            let sizes: Vec<usize> = marginals.iter().map(|(a, _)| marginal_size(domain, a)).collect();
            let best = sizes.iter().copied().max().unwrap_or(1).max(1);
            let reachable = marginals.iter().zip(&sizes).any(|((attrs, cells), &s)| {
                let rest: usize = (0..domain.num_attributes())
                    .filter(|a| !attrs.contains(a))
                    .map(|a| domain.attributes()[a].cardinality())
                    .product();
                s == best && all_positive(queries, cells) && (rest >= 3 || (rest == 2 && s % 2 == 0))
            });
            (2 * best, all_answered && reachable)
        }
        Shape::DisjointRectangles { boxes } => {
            let theta = match policy.graph() {
                SecretGraph::DistanceThreshold { theta } => *theta,
                _ => unreachable!("rectangles are only recognised under a distance graph"),
            };
            let p = boxes.len();
            let mut parent: Vec<usize> = (0..p).collect();
            fn find(parent: &mut [usize], i: usize) -> usize {
                let mut r = i;
                while parent[r] != r {
                    r = parent[r];
                }
                parent[i] = r;
                r
            }
            for i in 0..p {
                for j in i + 1..p {
                    if box_gap(&boxes[i], &boxes[j]) <= theta {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
            let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for i in 0..p {
                let r = find(&mut parent, i);
                comps.entry(r).or_default().push(i);
            }
            let maxcomp = comps.values().map(Vec::len).max().unwrap_or(0);
            let no_points = queries.iter().all(|q| !q.is_point_query(domain));

            let exact = all_answered && no_points && {
                let free: Vec<Vec<usize>> = (0..domain.size())
                    .filter(|&r| !queries.iter().any(|q| q.matches(&domain.coords(r))))
                    .map(|r| domain.coords(r))
                    .collect();
                let near_free = |b: &[(usize, usize)]| {
                    free.iter().any(|x| {
                        let pt: Vec<(usize, usize)> = x.iter().map(|&v| (v, v)).collect();
                        box_gap(b, &pt) <= theta
                    })
                };
                comps.values().filter(|c| c.len() == maxcomp).any(|c| {
                    let clique = c
                        .iter()
                        .all(|&i| c.iter().all(|&j| i == j || box_gap(&boxes[i], &boxes[j]) <= theta));
                    let ends = c.iter().filter(|&&i| near_free(&boxes[i])).count();
                    clique && all_positive(queries, c) && ends >= c.len().min(2)
                })
            };
            (2 * (maxcomp + 1), exact)
        }
    };
    Ok(SensitivityResult::new(
        value as f64,
        if exact { Exactness::Exact } else { Exactness::UpperBound },
        Method::Specialized,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AttributeSpec;
    use crate::policy::ConstraintSet;

    #[test]
    fn single_marginal_two_by_two() {
        let d = DomainSpec::new(vec![
            AttributeSpec::new("A1", &["a1", "a2"]),
            AttributeSpec::new("A2", &["b1", "b2"]),
            AttributeSpec::new("A3", &["c1", "c2", "c3"]),
        ])
        .unwrap();
        let q = ConstraintSet::marginal(&d, &[0, 1], Some(&[1, 1, 1, 1])).unwrap();
        let p = Policy::new(d, SecretGraph::Full, q).unwrap();
        let r = specialized_constraint_sensitivity(&p).unwrap();
        assert_eq!(r.value, 8.0);
        assert_eq!(r.exactness, Exactness::Exact);
        assert_eq!(r.method, Method::Specialized);
    }

    #[test]
    fn disjoint_marginals_attribute_graph() {
        let d = DomainSpec::new(vec![
            AttributeSpec::ordinal("a", 4),
            AttributeSpec::ordinal("b", 3),
            AttributeSpec::ordinal("c", 3),
        ])
        .unwrap();
        let mut q = ConstraintSet::marginal(&d, &[0], Some(&[1, 1, 1, 1])).unwrap();
        q.extend(ConstraintSet::marginal(&d, &[1], Some(&[2, 1, 1])).unwrap());
        let p = Policy::new(d, SecretGraph::Attribute, q).unwrap();
        let r = specialized_constraint_sensitivity(&p).unwrap();
        assert_eq!(r.value, 8.0);
        assert_eq!(r.exactness, Exactness::Exact);
    }

    #[test]
    fn rectangles_on_a_grid() {
        let d = DomainSpec::grid(2, 10).unwrap();
        let q = ConstraintSet::new(vec![
            CountQuery::rectangle(&d, &[(0, 1), (0, 1)], Some(1)).unwrap(),
            CountQuery::rectangle(&d, &[(0, 1), (3, 4)], Some(1)).unwrap(),
            CountQuery::rectangle(&d, &[(7, 9), (7, 9)], Some(1)).unwrap(),
        ]);
        let p = Policy::new(d, SecretGraph::distance(2), q).unwrap();
        let r = specialized_constraint_sensitivity(&p).unwrap();
        assert_eq!(r.value, 6.0);
        assert_eq!(r.exactness, Exactness::Exact);
    }

    #[test]
    fn point_query_downgrades() {
        let d = DomainSpec::grid(2, 5).unwrap();
        let q = ConstraintSet::new(vec![
            CountQuery::rectangle(&d, &[(0, 0), (0, 0)], Some(1)).unwrap(),
            CountQuery::rectangle(&d, &[(0, 1), (2, 3)], Some(1)).unwrap(),
        ]);
        let p = Policy::new(d, SecretGraph::distance(2), q).unwrap();
        let r = specialized_constraint_sensitivity(&p).unwrap();
        assert_eq!(r.value, 6.0);
        assert_eq!(r.exactness, Exactness::UpperBound);
    }

    #[test]
    fn unrecognized_shapes() {
        let d = DomainSpec::grid(2, 4).unwrap();
        let overlapping = ConstraintSet::new(vec![
            CountQuery::rectangle(&d, &[(0, 2), (0, 2)], None).unwrap(),
            CountQuery::rectangle(&d, &[(1, 3), (1, 3)], None).unwrap(),
        ]);
        let p = Policy::new(d.clone(), SecretGraph::distance(1), overlapping).unwrap();
        assert!(matches!(specialized_constraint_sensitivity(&p), Err(Error::UnrecognizedShape(_))));

        let whole = ConstraintSet::marginal(&d, &[0, 1], None).unwrap();
        let p = Policy::new(d, SecretGraph::Full, whole).unwrap();
        assert!(matches!(specialized_constraint_sensitivity(&p), Err(Error::UnrecognizedShape(_))));
    }
}
