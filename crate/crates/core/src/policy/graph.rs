use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;
use serde_json::Value;

use crate::domain::{DomainSpec, Point};
use crate::error::{Error, Result};

/// Largest domain for which edge sets are enumerated explicitly.
pub const MAX_ENUMERATED_DOMAIN: usize = 4096;

/// Discriminative secret graph over domain values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SecretGraph {
    Full,
    Attribute,
    /// `cells[rank]` is the partition id of each domain value.
    Partition { cells: Vec<usize> },
    /// Edge iff the L1 distance in index units is at most `theta`.
    DistanceThreshold { theta: u64 },
    /// Undirected edges over ranks, stored as `(min, max)`.
    Explicit { edges: BTreeSet<(usize, usize)> },
}

impl SecretGraph {
    pub fn partition(cells: Vec<usize>) -> Self {
        Self::Partition { cells }
    }

    /// Partition whose blocks are the value combinations of `attrs`.
    pub fn partition_by(domain: &DomainSpec, attrs: &[usize]) -> Self {
        let cells = (0..domain.size())
            .map(|r| attrs.iter().fold(0, |acc, &a| acc * domain.attributes()[a].cardinality() + domain.coord(r, a)))
            .collect();
        Self::Partition { cells }
    }

    pub fn distance(theta: u64) -> Self {
        Self::DistanceThreshold { theta }
    }

    pub fn explicit<I: IntoIterator<Item = (usize, usize)>>(edges: I) -> Self {
        Self::Explicit {
            edges: edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Attribute => "attribute",
            Self::Partition { .. } => "partition",
            Self::DistanceThreshold { .. } => "distance",
            Self::Explicit { .. } => "explicit",
        }
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        match self {
            Self::Partition { cells } if cells.len() != domain.size() => Err(Error::InvalidPolicy(format!(
                "partition map covers {} values, domain has {}",
                cells.len(),
                domain.size()
            ))),
            Self::Explicit { edges } => {
                for &(a, b) in edges {
                    if a == b {
                        return Err(Error::InvalidPolicy(format!("self-loop on rank {a}")));
                    }
                    if b >= domain.size() {
                        return Err(Error::InvalidPolicy(format!("edge ({a}, {b}) references a missing rank")));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn from_json_value(value: &Value, domain: &DomainSpec) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidPolicy("`graph` must be an object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidPolicy("`graph.kind` missing".into()))?;
        let graph = match kind {
            "full" => Self::Full,
            "attribute" | "attr" => Self::Attribute,
            "distance" | "distance-threshold" => {
                let theta = obj
                    .get("theta")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Error::InvalidPolicy("distance graph needs integer `theta`".into()))?;
                Self::DistanceThreshold { theta }
            }
            "partition" => {
                if let Some(by) = obj.get("by") {
                    let names: Vec<String> = serde_json::from_value(by.clone())?;
                    let attrs = names
                        .iter()
                        .map(|n| {
                            domain
                                .attribute_index(n)
                                .ok_or_else(|| Error::InvalidPolicy(format!("unknown attribute `{n}`")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Self::partition_by(domain, &attrs)
                } else if let Some(blocks) = obj.get("blocks") {
                    let blocks: Vec<Vec<usize>> = serde_json::from_value(blocks.clone())?;
                    let mut cells = vec![usize::MAX; domain.size()];
                    for (b, block) in blocks.iter().enumerate() {
                        for &r in block {
                            match cells.get_mut(r) {
                                Some(c) if *c == usize::MAX => *c = b,
                                Some(_) => {
                                    return Err(Error::InvalidPolicy(format!("rank {r} is in two blocks")))
                                }
                                None => return Err(Error::InvalidPolicy(format!("rank {r} out of range"))),
                            }
                        }
                    }
                    if let Some(r) = cells.iter().position(|&c| c == usize::MAX) {
                        return Err(Error::InvalidPolicy(format!("rank {r} is in no block")));
                    }
                    Self::Partition { cells }
                } else if let Some(cells) = obj.get("cells") {
                    Self::Partition {
                        cells: serde_json::from_value(cells.clone())?,
                    }
                } else {
                    return Err(Error::InvalidPolicy("partition graph needs `by`, `blocks` or `cells`".into()));
                }
            }
            "explicit" => {
                let edges: Vec<(usize, usize)> = serde_json::from_value(
                    obj.get("edges")
                        .cloned()
                        .ok_or_else(|| Error::InvalidPolicy("explicit graph needs `edges`".into()))?,
                )?;
                Self::explicit(edges)
            }
            other => return Err(Error::InvalidPolicy(format!("unknown graph kind `{other}`"))),
        };
        graph.validate(domain)?;
        Ok(graph)
    }

    /// Whether `(x, y)` is a discriminative secret pair. Always false for
    /// `x == y`.
    pub fn is_edge(&self, domain: &DomainSpec, x: &Point, y: &Point) -> Result<bool> {
        let (a, b) = (domain.rank(x)?, domain.rank(y)?);
        Ok(self.is_edge_ranks(domain, a, b))
    }

    pub fn is_edge_ranks(&self, domain: &DomainSpec, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        match self {
            Self::Full => true,
            Self::Attribute => {
                (0..domain.num_attributes())
                    .filter(|&i| domain.coord(a, i) != domain.coord(b, i))
                    .count()
                    == 1
            }
            Self::Partition { cells } => cells[a] == cells[b],
            Self::DistanceThreshold { theta } => domain.l1_between_ranks(a, b) <= *theta,
            Self::Explicit { edges } => edges.contains(&(a.min(b), a.max(b))),
        }
    }

    /// Shortest-path length in the graph; `None` when disconnected.
    pub fn graph_distance(&self, domain: &DomainSpec, x: &Point, y: &Point) -> Result<Option<u64>> {
        let (a, b) = (domain.rank(x)?, domain.rank(y)?);
        if a == b {
            return Ok(Some(0));
        }
        Ok(match self {
            Self::Full => Some(1),
            Self::Partition { cells } => (cells[a] == cells[b]).then_some(1),
            Self::Attribute => Some(
                (0..domain.num_attributes())
                    .filter(|&i| domain.coord(a, i) != domain.coord(b, i))
                    .count() as u64,
            ),
            Self::DistanceThreshold { theta: 0 } => None,
            Self::DistanceThreshold { theta } => Some(domain.l1_between_ranks(a, b).div_ceil(*theta)),
            Self::Explicit { .. } => self.bfs_distance(domain, a, b)?,
        })
    }

    /// Breadth-first search over explicitly enumerated edges.
    pub fn bfs_distance(&self, domain: &DomainSpec, a: usize, b: usize) -> Result<Option<u64>> {
        Ok(bfs_from(&self.adjacency(domain)?, a)[b])
    }

    /// Neighbor lists per rank.
    pub fn adjacency(&self, domain: &DomainSpec) -> Result<Vec<Vec<usize>>> {
        let mut adj = vec![Vec::new(); domain.size()];
        self.for_each_edge(domain, |a, b| adj[a].push(b))?;
        Ok(adj)
    }

    /// Calls `f(a, b)` for every ordered edge, i.e. both `(a, b)` and `(b, a)`.
    pub fn for_each_edge<F: FnMut(usize, usize)>(&self, domain: &DomainSpec, mut f: F) -> Result<()> {
        let size = domain.size();
        match self {
            Self::Explicit { edges } => {
                for &(a, b) in edges {
                    f(a, b);
                    f(b, a);
                }
            }
            Self::Attribute => {
                for a in 0..size {
                    for (i, attr) in domain.attributes().iter().enumerate() {
                        let here = domain.coord(a, i);
                        let stride = domain.strides()[i];
                        for v in 0..attr.cardinality() {
                            if v != here {
                                f(a, a + v * stride - here * stride);
                            }
                        }
                    }
                }
            }
            Self::Partition { cells } => {
                let mut blocks: HashMap<usize, Vec<usize>> = HashMap::new();
                for (r, &c) in cells.iter().enumerate() {
                    blocks.entry(c).or_default().push(r);
                }
                let mut ids: Vec<_> = blocks.keys().copied().collect();
                ids.sort_unstable();
                let pairs: usize = blocks.values().map(|b| b.len() * b.len()).sum();
                check_enumerable(pairs)?;
                for id in ids {
                    let block = &blocks[&id];
                    for &a in block {
                        for &b in block {
                            if a != b {
                                f(a, b);
                            }
                        }
                    }
                }
            }
            Self::Full | Self::DistanceThreshold { .. } => {
                check_enumerable(size.saturating_mul(size))?;
                for a in 0..size {
                    for b in 0..size {
                        if self.is_edge_ranks(domain, a, b) {
                            f(a, b);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the graph has at least one edge.
    pub fn has_edge(&self, domain: &DomainSpec) -> bool {
        match self {
            Self::Full | Self::Attribute => domain.size() > 1 && domain.attributes().iter().any(|a| a.cardinality() > 1),
            Self::DistanceThreshold { theta } => *theta > 0 && domain.size() > 1,
            Self::Partition { cells } => {
                let mut seen = HashSet::new();
                cells.iter().any(|c| !seen.insert(*c))
            }
            Self::Explicit { edges } => !edges.is_empty(),
        }
    }
}

/// Distances from `source` to every vertex of an adjacency list.
pub fn bfs_from(adj: &[Vec<usize>], source: usize) -> Vec<Option<u64>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let next = dist[v].map(|d| d + 1);
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = next;
                queue.push_back(w);
            }
        }
    }
    dist
}

fn check_enumerable(pairs: usize) -> Result<()> {
    let cap = MAX_ENUMERATED_DOMAIN * MAX_ENUMERATED_DOMAIN;
    if pairs > cap {
        return Err(Error::BudgetExceeded {
            needed: pairs as u128,
            budget: cap as u64,
        });
    }
    Ok(())
}

/// Fast edge lookup by rank for repeated queries on a small domain.
pub struct EdgeOracle<'a> {
    graph: &'a SecretGraph,
    domain: &'a DomainSpec,
    matrix: Option<Vec<bool>>,
}

impl<'a> EdgeOracle<'a> {
    const MATRIX_LIMIT: usize = 2048;

    pub fn new(graph: &'a SecretGraph, domain: &'a DomainSpec) -> Self {
        let size = domain.size();
        let matrix = (size <= Self::MATRIX_LIMIT).then(|| {
            let mut m = vec![false; size * size];
            for a in 0..size {
                for b in 0..size {
                    m[a * size + b] = graph.is_edge_ranks(domain, a, b);
                }
            }
            m
        });
        Self { graph, domain, matrix }
    }

    pub fn is_edge(&self, a: usize, b: usize) -> bool {
        match &self.matrix {
            Some(m) => m[a * self.domain.size() + b],
            None => self.graph.is_edge_ranks(self.domain, a, b),
        }
    }
}
