//! Exhaustive neighbor enumeration for tiny populations.
//!
//! Databases over ids `0..n` are encoded as mixed-radix integers, tuple 0
//! most significant. A pair `(D1, D2)` is a neighbor when both satisfy every
//! answered constraint, every differing tuple moves along an edge of the
//! secret graph, and no database strictly between them (moving only a
//! non-empty proper subset of those tuples) also satisfies the constraints.

use rayon::prelude::*;
use serde::Serialize;

use super::graph::{EdgeOracle, MAX_ENUMERATED_DOMAIN};
use super::Policy;
use crate::domain::{Dataset, Point};
use crate::error::{Error, Result};

/// Default cap on `|T|^n`.
pub const DEFAULT_BUDGET: u64 = 100_000;

/// A realised secret pair: tuple `id` has value `x` in one database and `y`
/// in the other (values given as ranks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SecretPair {
    pub id: u64,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NeighborPair {
    pub d1: Dataset,
    pub d2: Dataset,
    pub t_set: Vec<SecretPair>,
    /// Size of the symmetric difference of the two tuple sets.
    pub delta: usize,
}

/// All databases of `n` tuples together with the subset satisfying the
/// policy's answered constraints.
pub struct DatabaseSpace<'a> {
    policy: &'a Policy,
    n: usize,
    size: usize,
    pow: Vec<usize>,
    in_iq: Vec<bool>,
    members: Vec<usize>,
    edges: EdgeOracle<'a>,
    adjacency: Option<Vec<Vec<usize>>>,
}

impl<'a> DatabaseSpace<'a> {
    pub fn new(policy: &'a Policy, n: usize, budget: u64) -> Result<Self> {
        let size = policy.domain().size();
        let total = (size as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if total > budget as u128 {
            return Err(Error::BudgetExceeded { needed: total, budget });
        }
        let total = total as usize;
        let pow: Vec<usize> = (0..n).map(|i| size.pow((n - 1 - i) as u32)).collect();

        let answered: Vec<(Vec<bool>, u64)> = policy
            .constraints()
            .membership(policy.domain())
            .into_iter()
            .zip(policy.constraints().queries())
            .filter_map(|(row, q)| q.answer().map(|a| (row, a)))
            .collect();

        let in_iq: Vec<bool> = (0..total)
            .into_par_iter()
            .map(|db| {
                answered.iter().all(|(row, answer)| {
                    let count = (0..n).filter(|&i| row[(db / pow[i]) % size]).count() as u64;
                    count == *answer
                })
            })
            .collect();
        let members: Vec<usize> = (0..total).filter(|&db| in_iq[db]).collect();
        if members.is_empty() {
            return Err(Error::InconsistentConstraints);
        }

        let graph = policy.graph();
        let domain = policy.domain();
        let adjacency = if size <= MAX_ENUMERATED_DOMAIN {
            graph.adjacency(domain).ok().map(|mut adj| {
                for list in &mut adj {
                    list.sort_unstable();
                }
                adj
            })
        } else {
            None
        };
        Ok(Self {
            policy,
            n,
            size,
            pow,
            in_iq,
            members,
            edges: EdgeOracle::new(graph, domain),
            adjacency,
        })
    }

    pub fn policy(&self) -> &Policy {
        self.policy
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Database indices in `I_Q`, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, db: usize) -> bool {
        self.in_iq.get(db).copied().unwrap_or(false)
    }

    /// Rank of every tuple, by id.
    pub fn decode(&self, db: usize) -> Vec<usize> {
        self.pow.iter().map(|&p| (db / p) % self.size).collect()
    }

    pub fn encode(&self, ranks: &[usize]) -> usize {
        ranks.iter().zip(&self.pow).map(|(r, p)| r * p).sum()
    }

    pub fn to_dataset(&self, db: usize) -> Dataset {
        let domain = self.policy.domain();
        Dataset::from_points(
            self.decode(db)
                .into_iter()
                .map(|r| Point(domain.coords(r)))
                .collect(),
        )
    }

    /// The neighbor test for two member databases.
    pub fn is_neighbor(&self, d1: usize, d2: usize) -> bool {
        let mut diff: Vec<(usize, isize)> = Vec::new();
        for (i, &p) in self.pow.iter().enumerate() {
            let (a, b) = ((d1 / p) % self.size, (d2 / p) % self.size);
            if a != b {
                if !self.edges.is_edge(a, b) {
                    return false;
                }
                diff.push((i, (b as isize - a as isize) * p as isize));
            }
        }
        if diff.is_empty() || !self.contains(d1) || !self.contains(d2) {
            return false;
        }
        let full = (1usize << diff.len()) - 1;
        (1..full).all(|mask| {
            let shift: isize = diff
                .iter()
                .enumerate()
                .filter(|(j, _)| mask & (1 << j) != 0)
                .map(|(_, &(_, s))| s)
                .sum();
            !self.in_iq[(d1 as isize + shift) as usize]
        })
    }

    /// Neighbors of `d1`, ascending.
    fn neighbors_of(&self, d1: usize) -> Vec<usize> {
        let ranks = self.decode(d1);
        let product = self.adjacency.as_ref().map(|adj| {
            ranks
                .iter()
                .map(|&r| adj[r].len() as u128 + 1)
                .fold(1u128, |a, b| a.saturating_mul(b))
        });
        match (&self.adjacency, product) {
            (Some(adj), Some(p)) if p < self.members.len() as u128 => {
                let options: Vec<Vec<usize>> = ranks
                    .iter()
                    .map(|&r| {
                        let mut o = adj[r].clone();
                        o.push(r);
                        o.sort_unstable();
                        o
                    })
                    .collect();
                let mut out = Vec::new();
                let mut choice = vec![0usize; self.n];
                loop {
                    let d2: usize = (0..self.n).map(|i| options[i][choice[i]] * self.pow[i]).sum();
                    if d2 != d1 && self.is_neighbor(d1, d2) {
                        out.push(d2);
                    }
                    let mut i = self.n;
                    loop {
                        if i == 0 {
                            out.sort_unstable();
                            return out;
                        }
                        i -= 1;
                        choice[i] += 1;
                        if choice[i] < options[i].len() {
                            break;
                        }
                        choice[i] = 0;
                    }
                }
            }
            _ => self
                .members
                .iter()
                .copied()
                .filter(|&d2| self.is_neighbor(d1, d2))
                .collect(),
        }
    }

    /// Every ordered neighbor pair, sorted.
    pub fn neighbor_indices(&self) -> Vec<(usize, usize)> {
        self.members
            .par_iter()
            .map(|&d1| self.neighbors_of(d1).into_iter().map(|d2| (d1, d2)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }

    /// Largest `f(D1, D2)` over all neighbor pairs, with the first pair (in
    /// index order) attaining it.
    pub fn max_over_neighbors<F>(&self, f: F) -> Option<(f64, usize, usize)>
    where
        F: Fn(&[usize], &[usize]) -> f64 + Sync,
    {
        self.members
            .par_iter()
            .filter_map(|&d1| {
                let r1 = self.decode(d1);
                self.neighbors_of(d1)
                    .into_iter()
                    .map(|d2| (f(&r1, &self.decode(d2)), d1, d2))
                    .reduce(better)
            })
            .reduce_with(better)
    }

    pub fn secret_pairs(&self, d1: usize, d2: usize) -> Vec<SecretPair> {
        self.decode(d1)
            .into_iter()
            .zip(self.decode(d2))
            .enumerate()
            .filter(|(_, (a, b))| a != b && self.edges.is_edge(*a, *b))
            .map(|(i, (x, y))| SecretPair { id: i as u64, x, y })
            .collect()
    }

    pub fn pair(&self, d1: usize, d2: usize) -> NeighborPair {
        let changed = self
            .decode(d1)
            .into_iter()
            .zip(self.decode(d2))
            .filter(|(a, b)| a != b)
            .count();
        NeighborPair {
            d1: self.to_dataset(d1),
            d2: self.to_dataset(d2),
            t_set: self.secret_pairs(d1, d2),
            delta: 2 * changed,
        }
    }
}

fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> (f64, usize, usize) {
    if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
        b
    } else {
        a
    }
}

/// All ordered neighbor pairs of databases with `n` tuples.
pub fn enumerate_neighbors(policy: &Policy, n: usize, budget: u64) -> Result<Vec<NeighborPair>> {
    let space = DatabaseSpace::new(policy, n, budget)?;
    Ok(space
        .neighbor_indices()
        .into_iter()
        .map(|(a, b)| space.pair(a, b))
        .collect())
}
