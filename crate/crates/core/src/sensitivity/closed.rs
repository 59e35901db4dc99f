use std::collections::{BTreeSet, HashMap};

use super::{Exactness, Method, QueryKind, SensitivityResult};
use crate::error::{Error, Result};
use crate::policy::{ConstraintKind, Policy, SecretGraph};

/// Closed-form sensitivity for policies without general constraints.
///
/// A cardinality constraint leaves the neighbor relation unchanged (every
/// single-tuple change keeps the count), so it is accepted here too.
pub fn closed_form_sensitivity(q: &QueryKind, p: &Policy) -> Result<SensitivityResult> {
    if p.constraints().kind() == ConstraintKind::General {
        return Err(Error::ConstrainedPolicy);
    }
    let domain = p.domain();
    q.validate(domain)?;
    let has_edge = p.graph().has_edge(domain);
    let value = match q {
        QueryKind::CompleteHistogram => {
            if has_edge {
                2.0
            } else {
                0.0
            }
        }
        QueryKind::PartitionHistogram { cells } => {
            if crosses_cells(p, cells)? {
                2.0
            } else {
                0.0
            }
        }
        QueryKind::CumulativeHistogram => max_rank_gap(p)? as f64,
        QueryKind::LinearSum { weights, low, high } => {
            let w = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
            let step = QueryKind::linear_value(*low, *high, domain.size(), 1) - low;
            max_rank_gap(p)? as f64 * step * w
        }
        QueryKind::KmeansSize { k } => {
            if *k >= 2 && has_edge {
                2.0
            } else {
                0.0
            }
        }
        QueryKind::KmeansSum { k } => {
            let l1 = max_edge_l1(p)? as f64;
            if *k >= 2 {
                2.0 * l1
            } else {
                l1
            }
        }
    };
    Ok(SensitivityResult::new(value, Exactness::Exact, Method::ClosedForm))
}

fn generic_max<F: Fn(usize, usize) -> u64>(p: &Policy, f: F) -> Result<u64> {
    let mut best = 0;
    p.graph().for_each_edge(p.domain(), |a, b| best = best.max(f(a, b)))?;
    Ok(best)
}

fn partition_blocks(cells: &[usize]) -> Vec<Vec<usize>> {
    let mut blocks: HashMap<usize, Vec<usize>> = HashMap::new();
    for (r, &c) in cells.iter().enumerate() {
        blocks.entry(c).or_default().push(r);
    }
    blocks.into_values().collect()
}

/// Largest `|rank(x) - rank(y)|` over edges.
fn max_rank_gap(p: &Policy) -> Result<u64> {
    let domain = p.domain();
    if !p.graph().has_edge(domain) {
        return Ok(0);
    }
    Ok(match p.graph() {
        SecretGraph::Full => (domain.size() - 1) as u64,
        SecretGraph::Attribute => domain
            .attributes()
            .iter()
            .zip(domain.strides())
            .map(|(a, &s)| ((a.cardinality() - 1) * s) as u64)
            .max()
            .unwrap_or(0),
        SecretGraph::DistanceThreshold { theta } if domain.num_attributes() == 1 => {
            (*theta).min(domain.size() as u64 - 1)
        }
        SecretGraph::Partition { cells } => partition_blocks(cells)
            .iter()
            .map(|b| (b.iter().max().unwrap() - b.iter().min().unwrap()) as u64)
            .max()
            .unwrap_or(0),
        _ => generic_max(p, |a, b| a.abs_diff(b) as u64)?,
    })
}

/// Largest L1 length of an edge.
fn max_edge_l1(p: &Policy) -> Result<u64> {
    let domain = p.domain();
    if !p.graph().has_edge(domain) {
        return Ok(0);
    }
    Ok(match p.graph() {
        SecretGraph::Full => domain.diameter(),
        SecretGraph::Attribute => domain
            .attributes()
            .iter()
            .map(|a| (a.cardinality() - 1) as u64)
            .max()
            .unwrap_or(0),
        SecretGraph::DistanceThreshold { theta } => (*theta).min(domain.diameter()),
        _ => generic_max(p, |a, b| domain.l1_between_ranks(a, b))?,
    })
}

/// Whether some edge joins two different cells of `cells`.
fn crosses_cells(p: &Policy, cells: &[usize]) -> Result<bool> {
    let domain = p.domain();
    Ok(match p.graph() {
        SecretGraph::Full => domain.size() > 1 && cells.iter().collect::<BTreeSet<_>>().len() > 1,
        SecretGraph::Partition { cells: blocks } => partition_blocks(blocks)
            .iter()
            .any(|b| b.iter().any(|&r| cells[r] != cells[b[0]])),
        _ => generic_max(p, |a, b| (cells[a] != cells[b]) as u64)? > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AttributeSpec, DomainSpec};
    use crate::policy::{ConstraintSet, CountQuery};

    fn line(n: usize, g: SecretGraph) -> Policy {
        Policy::unconstrained(DomainSpec::line("x", n).unwrap(), g).unwrap()
    }

    fn value(q: QueryKind, p: &Policy) -> f64 {
        closed_form_sensitivity(&q, p).unwrap().value
    }

    #[test]
    fn histogram_and_cumulative() {
        assert_eq!(value(QueryKind::CompleteHistogram, &line(8, SecretGraph::Full)), 2.0);
        assert_eq!(value(QueryKind::CumulativeHistogram, &line(8, SecretGraph::Full)), 7.0);
        assert_eq!(value(QueryKind::CumulativeHistogram, &line(8, SecretGraph::distance(1))), 1.0);
        assert_eq!(value(QueryKind::CumulativeHistogram, &line(8, SecretGraph::distance(3))), 3.0);
        assert_eq!(value(QueryKind::CompleteHistogram, &line(8, SecretGraph::distance(0))), 0.0);
    }

    #[test]
    fn linear_sum_scales_with_theta() {
        let q = QueryKind::LinearSum {
            weights: vec![0.5, 2.0, 1.0],
            low: 0.0,
            high: 9.0,
        };
        assert_eq!(value(q.clone(), &line(10, SecretGraph::distance(3))), 6.0);
        assert_eq!(value(q, &line(10, SecretGraph::Full)), 18.0);
    }

    #[test]
    fn aligned_partition_histogram_is_free() {
        let cells = vec![0, 0, 1, 1, 2];
        let p = line(5, SecretGraph::partition(cells.clone()));
        assert_eq!(value(QueryKind::PartitionHistogram { cells }, &p), 0.0);
        let p = line(5, SecretGraph::Full);
        assert_eq!(value(QueryKind::PartitionHistogram { cells: vec![0, 0, 1, 1, 2] }, &p), 2.0);
    }

    #[test]
    fn kmeans_sum_per_graph() {
        let d = DomainSpec::new(vec![AttributeSpec::ordinal("a", 4), AttributeSpec::ordinal("b", 6)]).unwrap();
        let full = Policy::unconstrained(d.clone(), SecretGraph::Full).unwrap();
        let dist = Policy::unconstrained(d.clone(), SecretGraph::distance(2)).unwrap();
        let attr = Policy::unconstrained(d.clone(), SecretGraph::Attribute).unwrap();
        let part = Policy::unconstrained(d.clone(), SecretGraph::partition_by(&d, &[0])).unwrap();
        let q = QueryKind::KmeansSum { k: 3 };
        assert_eq!(value(q.clone(), &full), 16.0);
        assert_eq!(value(q.clone(), &dist), 4.0);
        assert_eq!(value(q.clone(), &attr), 10.0);
        assert_eq!(value(q.clone(), &part), 10.0);
        assert_eq!(value(QueryKind::KmeansSize { k: 3 }, &full), 2.0);
        assert_eq!(value(QueryKind::KmeansSum { k: 1 }, &dist), 2.0);
    }

    #[test]
    fn rejects_general_constraints() {
        let d = DomainSpec::line("x", 3).unwrap();
        let q = CountQuery::new(&d, vec![Some(vec![0])], Some(1)).unwrap();
        let p = Policy::new(d.clone(), SecretGraph::Full, ConstraintSet::new(vec![q])).unwrap();
        assert!(matches!(
            closed_form_sensitivity(&QueryKind::CompleteHistogram, &p),
            Err(Error::ConstrainedPolicy)
        ));
        let card = Policy::new(d.clone(), SecretGraph::Full, ConstraintSet::new(vec![CountQuery::cardinality(&d, Some(2))])).unwrap();
        assert!(closed_form_sensitivity(&QueryKind::CompleteHistogram, &card).is_ok());
    }
}
