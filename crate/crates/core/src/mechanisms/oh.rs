//! Ordered-hierarchical release of cumulative counts, the hierarchical
//! baseline and the budget split between the two node types.

use rayon::prelude::*;
use serde::Serialize;

use super::isotonic::{isotonic_inference, isotonic_inference_nonneg};
use super::noise::{check_epsilon, NoiseSource, TAG_INTERVAL};
use super::PrefixRelease;
use crate::domain::Histogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    /// Prefix count `[1, end]`.
    S,
    /// Interval count inside one block.
    H,
}

/// A noisy count over the 1-based inclusive interval `[start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub kind: NodeKind,
    /// 1-based block index (0 for the hierarchical baseline).
    pub block: usize,
    /// Depth below the block root; S-nodes and roots are level 0.
    pub level: usize,
    pub start: usize,
    pub end: usize,
    pub scale: f64,
    pub noisy: f64,
    #[serde(skip)]
    pub children: Vec<usize>,
}

/// Smallest `h` with `fanout^h >= len`.
pub fn tree_height(len: usize, fanout: usize) -> usize {
    let mut h = 0;
    let mut span = 1usize;
    while span < len {
        span = span.saturating_mul(fanout);
        h += 1;
    }
    h
}

/// Children of `[start, end]`: consecutive chunks of `ceil(len / fanout)`.
fn split_interval(start: usize, end: usize, fanout: usize) -> Vec<(usize, usize)> {
    let len = end + 1 - start;
    if len <= 1 {
        return Vec::new();
    }
    let width = len.div_ceil(fanout);
    (start..=end)
        .step_by(width)
        .map(|s| (s, (s + width - 1).min(end)))
        .collect()
}

/// Appends the subtree below `[start, end]` (excluding that interval itself)
/// and returns the indices of its top-level nodes.
fn grow(
    nodes: &mut Vec<TreeNode>,
    start: usize,
    end: usize,
    level: usize,
    block: usize,
    fanout: usize,
    scale: f64,
) -> Vec<usize> {
    split_interval(start, end, fanout)
        .into_iter()
        .map(|(s, e)| {
            let idx = nodes.len();
            nodes.push(TreeNode {
                kind: NodeKind::H,
                block,
                level,
                start: s,
                end: e,
                scale,
                noisy: 0.0,
                children: Vec::new(),
            });
            let children = grow(nodes, s, e, level + 1, block, fanout, scale);
            nodes[idx].children = children;
            idx
        })
        .collect()
}

/// Canonical decomposition of `[first child start, j]` using `top` and its
/// descendants.
fn decompose(nodes: &[TreeNode], top: &[usize], j: usize, out: &mut Vec<usize>) {
    let mut level = top;
    loop {
        let mut partial = None;
        for &c in level {
            let n = &nodes[c];
            if n.end <= j {
                out.push(c);
            } else {
                if n.start <= j {
                    partial = Some(c);
                }
                break;
            }
        }
        match partial {
            Some(c) => level = &nodes[c].children,
            None => return,
        }
    }
}

fn add_noise(nodes: &mut [TreeNode], truth: &[u64], noise: &NoiseSource) -> Result<()> {
    nodes.par_iter_mut().try_for_each(|n| {
        let count = (truth[n.end] - truth[n.start - 1]) as f64;
        n.noisy = count + noise.laplace(&[TAG_INTERVAL, n.start as u64, n.end as u64], n.scale)?;
        Ok(())
    })
}

/// Prefix counts with a leading zero, so `truth[j]` counts `[1, j]`.
fn padded_prefix(h: &Histogram) -> Vec<u64> {
    let mut truth = vec![0];
    truth.extend_from_slice(h.cumulative().prefix());
    truth
}

/// Constants of the range-query error `c1 / eps_s^2 + c2 / eps_h^2`.
pub fn split_constants(domain_size: usize, theta: usize, fanout: usize) -> Result<(f64, f64)> {
    if domain_size == 0 {
        return Err(Error::InvalidParameter("domain size must be positive".into()));
    }
    if theta == 0 || theta > domain_size {
        return Err(Error::InvalidParameter(format!("theta must lie in [1, {domain_size}], got {theta}")));
    }
    if fanout < 2 {
        return Err(Error::InvalidParameter(format!("fanout must be at least 2, got {fanout}")));
    }
    let n = domain_size as f64;
    let c1 = 4.0 * (n - theta as f64) / (n + 1.0);
    let log = (theta as f64).ln() / (fanout as f64).ln();
    let c2 = 8.0 * (fanout as f64 - 1.0) * log.powi(3) * n / (n + 1.0);
    Ok((c1, c2))
}

/// `c1 / eps_s^2 + c2 / eps_h^2`, where a zero constant ignores its budget.
pub fn split_error(c1: f64, c2: f64, eps_s: f64, eps_h: f64) -> f64 {
    let term = |c: f64, e: f64| if c == 0.0 { 0.0 } else { c / (e * e) };
    term(c1, eps_s) + term(c2, eps_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetSplit {
    pub eps_s: f64,
    pub eps_h: f64,
    pub predicted_mse: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Split of `epsilon` between S-nodes and H-nodes that minimises the
/// predicted range-query error.
pub fn optimal_budget_split(domain_size: usize, theta: usize, fanout: usize, epsilon: f64) -> Result<BudgetSplit> {
    check_epsilon(epsilon)?;
    let (c1, c2) = split_constants(domain_size, theta, fanout)?;
    let (a, b) = (c1.cbrt(), c2.cbrt());
    let eps_s = if a + b == 0.0 { epsilon } else { a / (a + b) * epsilon };
    Ok(BudgetSplit {
        eps_s,
        eps_h: epsilon - eps_s,
        predicted_mse: (a + b).powi(3) / (epsilon * epsilon),
        c1,
        c2,
    })
}

/// Prefix S-nodes over blocks of `theta` positions, with an f-ary tree of
/// H-nodes inside every block.
#[derive(Debug, Clone, Serialize)]
pub struct OHTree {
    pub domain_size: usize,
    pub theta: usize,
    pub fanout: usize,
    pub height: usize,
    pub eps_s: f64,
    pub eps_h: f64,
    pub seed: u64,
    nodes: Vec<TreeNode>,
    #[serde(skip)]
    s_nodes: Vec<usize>,
    #[serde(skip)]
    block_tops: Vec<Vec<usize>>,
    #[serde(skip)]
    prefixes: Vec<f64>,
}

pub fn build_oh_release(
    h: &Histogram,
    theta: usize,
    fanout: usize,
    eps_s: f64,
    eps_h: f64,
    seed: u64,
) -> Result<OHTree> {
    build_oh_release_with(h, theta, fanout, eps_s, eps_h, &NoiseSource::new(seed))
}

pub fn build_oh_release_with(
    h: &Histogram,
    theta: usize,
    fanout: usize,
    eps_s: f64,
    eps_h: f64,
    noise: &NoiseSource,
) -> Result<OHTree> {
    let size = h.len();
    split_constants(size, theta, fanout)?;
    for e in [eps_s, eps_h] {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!("budgets must be finite and non-negative, got {e}")));
        }
    }
    let total = eps_s + eps_h;
    check_epsilon(total)?;
    let height = tree_height(theta, fanout);
    let k = size.div_ceil(theta);
    if k > 1 && eps_s == 0.0 {
        return Err(Error::InvalidParameter("S-nodes beyond the first need eps_s > 0".into()));
    }
    if k > 1 && height > 0 && eps_h == 0.0 {
        return Err(Error::InvalidParameter("H-nodes beyond the first block need eps_h > 0".into()));
    }

    let first_h = 2.0 * height as f64 / total;
    let mut nodes = Vec::new();
    let mut s_nodes = Vec::with_capacity(k);
    let mut block_tops = Vec::with_capacity(k);
    for i in 1..=k {
        let (lo, hi) = ((i - 1) * theta + 1, (i * theta).min(size));
        let scale = if i == 1 {
            (2.0 * height as f64).max(1.0) / total
        } else {
            1.0 / eps_s
        };
        s_nodes.push(nodes.len());
        nodes.push(TreeNode {
            kind: NodeKind::S,
            block: i,
            level: 0,
            start: 1,
            end: hi,
            scale,
            noisy: 0.0,
            children: Vec::new(),
        });
        let h_scale = if i == 1 { first_h } else { 2.0 * height as f64 / eps_h };
        block_tops.push(grow(&mut nodes, lo, hi, 1, i, fanout, h_scale));
    }
    let root = s_nodes[0];
    nodes[root].children = block_tops[0].clone();
    add_noise(&mut nodes, &padded_prefix(h), noise)?;

    let mut tree = OHTree {
        domain_size: size,
        theta,
        fanout,
        height,
        eps_s,
        eps_h,
        seed: noise.seed(),
        nodes,
        s_nodes,
        block_tops,
        prefixes: Vec::new(),
    };
    tree.prefixes = (1..=size).map(|j| tree.prefix_nodes(j).iter().map(|&n| tree.nodes[n].noisy).sum()).collect();
    Ok(tree)
}

impl OHTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_s_nodes(&self) -> usize {
        self.s_nodes.len()
    }

    pub fn s_node(&self, i: usize) -> &TreeNode {
        &self.nodes[self.s_nodes[i - 1]]
    }

    /// Nodes summed to answer the prefix `[1, j]`.
    pub fn prefix_nodes(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if j == 0 {
            return out;
        }
        if j == self.domain_size {
            out.push(*self.s_nodes.last().unwrap());
            return out;
        }
        let l = j / self.theta;
        if l >= 1 {
            out.push(self.s_nodes[l - 1]);
        }
        if j > l * self.theta {
            decompose(&self.nodes, &self.block_tops[l], j, &mut out);
        }
        out
    }

    /// Prefix estimates after isotonic inference.
    pub fn inferred(&self, clamp: bool) -> Vec<f64> {
        if clamp {
            isotonic_inference_nonneg(&self.prefixes)
        } else {
            isotonic_inference(&self.prefixes)
        }
    }
}

impl PrefixRelease for OHTree {
    fn prefixes(&self) -> &[f64] {
        &self.prefixes
    }
}

/// Noisy count of `[1, j]`.
pub fn oh_cumulative(tree: &OHTree, j: usize) -> Result<f64> {
    if j == 0 || j > tree.domain_size {
        return Err(Error::InvalidQuery(format!("prefix end {j} outside [1, {}]", tree.domain_size)));
    }
    Ok(tree.prefix_nodes(j).iter().map(|&n| tree.nodes[n].noisy).sum())
}

/// Noisy count of `[i, j]` as a difference of prefixes.
pub fn oh_range_query(tree: &OHTree, i: usize, j: usize) -> Result<f64> {
    tree.try_range(i, j)
}

/// f-ary tree over the whole domain with uniform budget across levels.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchicalTree {
    pub domain_size: usize,
    pub fanout: usize,
    pub height: usize,
    pub epsilon: f64,
    pub seed: u64,
    nodes: Vec<TreeNode>,
    #[serde(skip)]
    prefixes: Vec<f64>,
}

pub fn build_hierarchical_release(h: &Histogram, fanout: usize, epsilon: f64, noise: &NoiseSource) -> Result<HierarchicalTree> {
    check_epsilon(epsilon)?;
    let size = h.len();
    if size == 0 {
        return Err(Error::InvalidParameter("empty histogram".into()));
    }
    if fanout < 2 {
        return Err(Error::InvalidParameter(format!("fanout must be at least 2, got {fanout}")));
    }
    let height = tree_height(size, fanout);
    let scale = 2.0 * height as f64 / epsilon;
    let mut nodes = vec![TreeNode {
        kind: NodeKind::H,
        block: 0,
        level: 0,
        start: 1,
        end: size,
        scale: (2.0 * height as f64).max(1.0) / epsilon,
        noisy: 0.0,
        children: Vec::new(),
    }];
    nodes[0].children = grow(&mut nodes, 1, size, 1, 0, fanout, scale);
    add_noise(&mut nodes, &padded_prefix(h), noise)?;
    let mut tree = HierarchicalTree {
        domain_size: size,
        fanout,
        height,
        epsilon,
        seed: noise.seed(),
        nodes,
        prefixes: Vec::new(),
    };
    tree.prefixes = (1..=size)
        .map(|j| tree.prefix_nodes(j).iter().map(|&n| tree.nodes[n].noisy).sum())
        .collect();
    Ok(tree)
}

impl HierarchicalTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn prefix_nodes(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::new();
        if j == self.domain_size {
            out.push(0);
        } else if j > 0 {
            decompose(&self.nodes, &self.nodes[0].children, j, &mut out);
        }
        out
    }
}

impl PrefixRelease for HierarchicalTree {
    fn prefixes(&self) -> &[f64] {
        &self.prefixes
    }
}
