//! Sparse count constraints and the policy graph.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{brute_force_sensitivity, Exactness, Method, QueryKind, SensitivityResult};
use crate::domain::{DomainSpec, Point};
use crate::error::{Error, Result};
use crate::policy::{signature_classes, ConstraintSet, CountQuery, Policy, SecretGraph};

/// Largest policy graph (queries plus the two sentinels) searched for
/// longest cycles and paths.
pub const MAX_POLICY_GRAPH_VERTICES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LiftLower {
    Lifts,
    Lowers,
    Neither,
}

/// Effect on `q` of one tuple moving from `x` to `y`.
pub fn lifts_lowers(x: &Point, y: &Point, q: &CountQuery) -> LiftLower {
    match (q.matches_point(x), q.matches_point(y)) {
        (false, true) => LiftLower::Lifts,
        (true, false) => LiftLower::Lowers,
        _ => LiftLower::Neither,
    }
}

/// One realised class-to-class move with a witness edge.
struct ClassMove {
    x: usize,
    y: usize,
    lifted: Vec<usize>,
    lowered: Vec<usize>,
}

/// Every distinct lift/lower effect realised by an edge of `g`.
fn class_moves(qs: &ConstraintSet, g: &SecretGraph, domain: &DomainSpec) -> Result<Vec<ClassMove>> {
    let table = qs.membership(domain);
    let (class_of, signatures) = signature_classes(&table, domain.size());
    let mut first_of = vec![usize::MAX; signatures.len()];
    for (r, &c) in class_of.iter().enumerate() {
        if first_of[c] == usize::MAX {
            first_of[c] = r;
        }
    }

    let mut seen: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    match g {
        SecretGraph::Full => {
            for a in 0..signatures.len() {
                for b in 0..signatures.len() {
                    if a != b {
                        seen.insert((a, b), (first_of[a], first_of[b]));
                    }
                }
            }
        }
        _ => g.for_each_edge(domain, |x, y| {
            let key = (class_of[x], class_of[y]);
            if key.0 != key.1 {
                seen.entry(key).or_insert((x, y));
            }
        })?,
    }

    Ok(seen
        .into_iter()
        .map(|((a, b), (x, y))| {
            let (sa, sb) = (&signatures[a], &signatures[b]);
            let lifted = (0..sa.len()).filter(|&q| !sa[q] && sb[q]).collect();
            let lowered = (0..sa.len()).filter(|&q| sa[q] && !sb[q]).collect();
            ClassMove { x, y, lifted, lowered }
        })
        .collect())
}

fn first_violation(moves: &[ClassMove]) -> Option<&ClassMove> {
    moves.iter().find(|m| m.lifted.len() > 1 || m.lowered.len() > 1)
}

/// True iff every edge lifts at most one query and lowers at most one.
pub fn is_sparse(qs: &ConstraintSet, g: &SecretGraph, domain: &DomainSpec) -> Result<bool> {
    Ok(first_violation(&class_moves(qs, g, domain)?).is_none())
}

/// Directed graph over the queries plus the sentinels `v+` and `v-`.
///
/// Query `i` is vertex `i`; `v+` is vertex `|Q|` and `v-` is `|Q| + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyGraph {
    num_queries: usize,
    /// Edge to the witness value pair (ranks) that created it; the
    /// `(v+, v-)` edge has none.
    edges: BTreeMap<(usize, usize), Option<(usize, usize)>>,
}

impl PolicyGraph {
    /// Graph with the given edges plus `(v+, v-)`.
    pub fn from_edges<I: IntoIterator<Item = (usize, usize)>>(num_queries: usize, edges: I) -> Self {
        let mut g = Self {
            num_queries,
            edges: BTreeMap::new(),
        };
        g.edges.insert((g.plus(), g.minus()), None);
        for e in edges {
            g.edges.entry(e).or_insert(None);
        }
        g
    }

    pub fn num_queries(&self) -> usize {
        self.num_queries
    }

    pub fn num_vertices(&self) -> usize {
        self.num_queries + 2
    }

    pub fn plus(&self) -> usize {
        self.num_queries
    }

    pub fn minus(&self) -> usize {
        self.num_queries + 1
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains_key(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.keys().copied()
    }

    pub fn witness(&self, from: usize, to: usize) -> Option<(usize, usize)> {
        self.edges.get(&(from, to)).copied().flatten()
    }
}

pub fn build_policy_graph(policy: &Policy) -> Result<PolicyGraph> {
    let domain = policy.domain();
    let qs = policy.constraints();
    let moves = class_moves(qs, policy.graph(), domain)?;
    if let Some(m) = first_violation(&moves) {
        return Err(Error::NotSparse(
            m.x,
            m.y,
            format!("lifts {} and lowers {} queries", m.lifted.len(), m.lowered.len()),
        ));
    }
    let mut g = PolicyGraph::from_edges(qs.len(), []);
    let (plus, minus) = (g.plus(), g.minus());
    for m in &moves {
        let edge = match (m.lowered.first(), m.lifted.first()) {
            (Some(&from), Some(&to)) => (from, to),
            (None, Some(&to)) => (plus, to),
            (Some(&from), None) => (from, minus),
            (None, None) => continue,
        };
        g.edges.entry(edge).or_insert(Some((m.x, m.y)));
    }
    Ok(g)
}

/// Longest simple cycle `alpha` (0 when acyclic) and longest simple path
/// from `v+` to `v-` `xi`, both counted in edges.
pub fn alpha_xi(pg: &PolicyGraph) -> Result<(usize, usize)> {
    let v = pg.num_vertices();
    if v > MAX_POLICY_GRAPH_VERTICES {
        return Err(Error::TooManyVertices(v, MAX_POLICY_GRAPH_VERTICES));
    }
    let mut out = vec![0u32; v];
    for (a, b) in pg.edges() {
        out[a] |= 1 << b;
    }

    // reach[mask] = endpoints of simple paths from `start` visiting exactly
    // the vertices in `mask`.
    let paths_from = |start: usize, allowed: u32| -> Vec<u32> {
        let mut reach = vec![0u32; 1 << v];
        reach[1 << start] = 1 << start;
        for mask in 0..(1u32 << v) {
            let ends = reach[mask as usize];
            if ends == 0 {
                continue;
            }
            for end in 0..v {
                if ends & (1 << end) == 0 {
                    continue;
                }
                let mut next = out[end] & allowed & !mask;
                while next != 0 {
                    let w = next.trailing_zeros();
                    next &= next - 1;
                    reach[(mask | (1 << w)) as usize] |= 1 << w;
                }
            }
        }
        reach
    };

    let all = (1u32 << v) - 1;
    let mut alpha = 0;
    for start in 0..v {
        let allowed = all & !((1u32 << start) - 1);
        let reach = paths_from(start, allowed);
        let back = closes(&out, start, v);
        for (mask, &ends) in reach.iter().enumerate() {
            let len = mask.count_ones() as usize;
            if len >= 2 && ends & back != 0 {
                alpha = alpha.max(len);
            }
        }
    }

    let reach = paths_from(pg.plus(), all);
    let xi = reach
        .iter()
        .enumerate()
        .filter(|(_, &ends)| ends & (1 << pg.minus()) != 0)
        .map(|(mask, _)| mask.count_ones() as usize - 1)
        .max()
        .unwrap_or(0);
    Ok((alpha, xi))
}

/// Vertices with an edge back to `start`.
fn closes(out: &[u32], start: usize, v: usize) -> u32 {
    (0..v).filter(|&u| out[u] & (1 << start) != 0).fold(0, |m, u| m | (1 << u))
}

/// `2 max(alpha, xi)` for sparse constraints, reported as an upper bound.
pub fn sparse_constraint_sensitivity(policy: &Policy) -> Result<SensitivityResult> {
    let pg = build_policy_graph(policy)?;
    let (alpha, xi) = alpha_xi(&pg)?;
    Ok(SensitivityResult::new(
        2.0 * alpha.max(xi) as f64,
        Exactness::UpperBound,
        Method::SparseEngine,
    ))
}

/// The sparse-engine bound, tagged `Exact` when exhaustive search over
/// `n`-tuple databases finds a neighbor pair attaining it.
pub fn sparse_sensitivity_certified(policy: &Policy, n: usize, budget: u64) -> Result<SensitivityResult> {
    let mut bound = sparse_constraint_sensitivity(policy)?;
    let oracle = brute_force_sensitivity(&QueryKind::CompleteHistogram, policy, n, budget)?;
    if oracle.value == bound.value {
        bound.exactness = Exactness::Exact;
    }
    Ok(bound)
}
