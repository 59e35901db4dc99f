//! Exhaustive sensitivity over enumerated neighbors.

use super::{Exactness, Method, QueryKind, SensitivityResult};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::policy::{DatabaseSpace, NeighborPair, Policy};

/// `max ||f(D1) - f(D2)||_1` over all neighbors of `n`-tuple databases.
pub fn brute_force_sensitivity(q: &QueryKind, p: &Policy, n: usize, budget: u64) -> Result<SensitivityResult> {
    brute_force_with_witness(q, p, n, budget).map(|(r, _)| r)
}

/// Like [`brute_force_sensitivity`], also returning a neighbor pair that
/// attains the maximum (none when there are no neighbors).
pub fn brute_force_with_witness(
    q: &QueryKind,
    p: &Policy,
    n: usize,
    budget: u64,
) -> Result<(SensitivityResult, Option<NeighborPair>)> {
    let domain = p.domain();
    q.validate(domain)?;
    if let QueryKind::LinearSum { weights, .. } = q {
        if weights.len() != n {
            return Err(Error::InvalidQuery(format!("{} weights for {n} tuples", weights.len())));
        }
    }
    let space = DatabaseSpace::new(p, n, budget)?;
    let best = space.max_over_neighbors(|a, b| difference(q, domain, a, b));
    let (value, witness) = match best {
        Some((v, d1, d2)) => (v, Some(space.pair(d1, d2))),
        None => (0.0, None),
    };
    Ok((SensitivityResult::new(value, Exactness::Exact, Method::BruteForce), witness))
}

fn histogram_l1<F: Fn(usize) -> usize>(cell: F, cells: usize, a: &[usize], b: &[usize]) -> f64 {
    let mut diff = vec![0i64; cells];
    for &r in a {
        diff[cell(r)] += 1;
    }
    for &r in b {
        diff[cell(r)] -= 1;
    }
    diff.iter().map(|d| d.unsigned_abs()).sum::<u64>() as f64
}

fn difference(q: &QueryKind, domain: &DomainSpec, a: &[usize], b: &[usize]) -> f64 {
    let size = domain.size();
    match q {
        QueryKind::CompleteHistogram => histogram_l1(|r| r, size, a, b),
        QueryKind::PartitionHistogram { cells } => {
            let count = cells.iter().max().map_or(0, |m| m + 1);
            histogram_l1(|r| cells[r], count, a, b)
        }
        QueryKind::CumulativeHistogram => {
            let mut diff = vec![0i64; size];
            for &r in a {
                diff[r] += 1;
            }
            for &r in b {
                diff[r] -= 1;
            }
            let mut acc = 0i64;
            diff.iter()
                .map(|d| {
                    acc += d;
                    acc.unsigned_abs()
                })
                .sum::<u64>() as f64
        }
        QueryKind::LinearSum { weights, low, high } => {
            let f = |ranks: &[usize]| -> f64 {
                ranks
                    .iter()
                    .zip(weights)
                    .map(|(&r, w)| w * QueryKind::linear_value(*low, *high, size, r))
                    .sum()
            };
            (f(a) - f(b)).abs()
        }
        QueryKind::KmeansSize { k } => max_over_assignments(domain, *k, a, b, false),
        QueryKind::KmeansSum { k } => max_over_assignments(domain, *k, a, b, true),
    }
}

/// Worst case over every assignment of the involved domain points to `k`
/// clusters of the L1 change in per-cluster sizes (or coordinate sums).
fn max_over_assignments(domain: &DomainSpec, k: usize, a: &[usize], b: &[usize], sums: bool) -> f64 {
    let mut support: Vec<usize> = a.iter().chain(b).copied().collect();
    support.sort_unstable();
    support.dedup();
    let dims = domain.num_attributes();
    let coords: Vec<Vec<usize>> = support.iter().map(|&r| domain.coords(r)).collect();
    let slot = |r: usize| support.binary_search(&r).unwrap();

    let mut assignment = vec![0usize; support.len()];
    let mut best = 0.0f64;
    loop {
        let width = if sums { dims } else { 1 };
        let mut diff = vec![0i64; k * width];
        for (ranks, sign) in [(a, 1i64), (b, -1i64)] {
            for &r in ranks {
                let s = slot(r);
                let c = assignment[s];
                if sums {
                    for (d, &v) in coords[s].iter().enumerate() {
                        diff[c * dims + d] += sign * v as i64;
                    }
                } else {
                    diff[c] += sign;
                }
            }
        }
        best = best.max(diff.iter().map(|d| d.unsigned_abs()).sum::<u64>() as f64);

        let mut i = 0;
        loop {
            if i == assignment.len() {
                return best;
            }
            assignment[i] += 1;
            if assignment[i] < k {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}
