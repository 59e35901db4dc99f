//! Lloyd's k-means and its noisy-statistics private counterpart.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{check_epsilon, BudgetLedger, NoiseSource, PrivacyParams, TAG_KMEANS};
use crate::policy::Policy;
use crate::sensitivity::{closed_form_sensitivity, QueryKind};

/// Noise sensitivity of the per-cluster size vector.
pub const SIZE_SENSITIVITY: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "centroids")]
pub enum Init {
    /// `k` uniform points in the bounding box, independent of the data.
    UniformBox,
    /// `k` distinct data points.
    RandomDataPoints,
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_init")]
    pub init: Init,
    /// Share of each iteration's budget spent on cluster sizes.
    #[serde(default = "default_share")]
    pub size_share: f64,
}

fn default_iterations() -> usize {
    10
}

fn default_init() -> Init {
    Init::UniformBox
}

fn default_share() -> f64 {
    0.5
}

impl KmeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            iterations: default_iterations(),
            init: default_init(),
            size_share: default_share(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.size_share > 0.0 && self.size_share < 1.0) {
            return Err(Error::InvalidParameter(format!("size share must lie in (0, 1), got {}", self.size_share)));
        }
        if let Init::Fixed(c) = &self.init {
            if c.len() != self.k {
                return Err(Error::InvalidParameter(format!("{} initial centroids for k = {}", c.len(), self.k)));
            }
        }
        Ok(())
    }
}

/// Noise scales used in one private iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationScales {
    pub size: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    /// Objective after each iteration.
    pub trace: Vec<f64>,
    /// Empty for the non-private run.
    pub scales: Vec<IterationScales>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<BudgetLedger>,
}

fn dims_of(data: &[Vec<f64>]) -> Result<usize> {
    let d = data.first().ok_or_else(|| Error::InvalidDataset("no points".into()))?.len();
    if data.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidDataset("points have different dimensions".into()));
    }
    Ok(d)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest index.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Sum of squared distances from every point to its nearest centroid.
pub fn kmeans_objective(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<f64> {
    let d = dims_of(data)?;
    if centroids.is_empty() || centroids.iter().any(|c| c.len() != d) {
        return Err(Error::InvalidParameter("centroid dimensions do not match the data".into()));
    }
    Ok(data.iter().map(|p| nearest(p, centroids).1).sum())
}

/// Per-cluster sizes and coordinate sums.
fn cluster_stats(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = centroids[0].len();
    let mut sizes = vec![0.0; centroids.len()];
    let mut sums = vec![vec![0.0; d]; centroids.len()];
    for p in data {
        let (c, _) = nearest(p, centroids);
        sizes[c] += 1.0;
        for (s, x) in sums[c].iter_mut().zip(p) {
            *s += x;
        }
    }
    (sizes, sums)
}

fn initial_centroids(data: &[Vec<f64>], cfg: &KmeansConfig, bounds: &[(f64, f64)], noise: &NoiseSource) -> Result<Vec<Vec<f64>>> {
    let mut rng = noise.stream(&[TAG_KMEANS, u64::MAX]);
    match &cfg.init {
        Init::Fixed(c) => {
            if c.iter().any(|v| v.len() != bounds.len()) {
                return Err(Error::InvalidParameter("initial centroid dimensions do not match the data".into()));
            }
            Ok(c.clone())
        }
        Init::RandomDataPoints => {
            if data.len() < cfg.k {
                return Err(Error::InvalidParameter(format!("{} points cannot seed {} clusters", data.len(), cfg.k)));
            }
            Ok(sample(&mut rng, data.len(), cfg.k).iter().map(|i| data[i].clone()).collect())
        }
        Init::UniformBox => Ok((0..cfg.k)
            .map(|_| {
                bounds
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                    .collect()
            })
            .collect()),
    }
}

fn data_bounds(data: &[Vec<f64>], d: usize) -> Vec<(f64, f64)> {
    (0..d)
        .map(|i| {
            data.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])))
        })
        .collect()
}

/// Lloyd iterations; an empty cluster keeps its previous centroid.
///
/// The uniform-box initialisation samples the bounding box of the data.
pub fn kmeans_nonprivate(data: &[Vec<f64>], cfg: &KmeansConfig, seed: u64) -> Result<ClusteringResult> {
    let d = dims_of(data)?;
    kmeans_nonprivate_in(data, cfg, seed, &data_bounds(data, d))
}

/// Lloyd iterations with the uniform initialisation drawn from `bounds`.
pub fn kmeans_nonprivate_in(data: &[Vec<f64>], cfg: &KmeansConfig, seed: u64, bounds: &[(f64, f64)]) -> Result<ClusteringResult> {
    cfg.validate()?;
    let d = dims_of(data)?;
    if bounds.len() != d {
        return Err(Error::InvalidParameter("bounds do not match the data dimension".into()));
    }
    let mut centroids = initial_centroids(data, cfg, bounds, &NoiseSource::new(seed))?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        let (sizes, sums) = cluster_stats(data, &centroids);
        for ((c, size), sum) in centroids.iter_mut().zip(&sizes).zip(sums) {
            if *size > 0.0 {
                *c = sum.into_iter().map(|s| s / size).collect();
            }
        }
        trace.push(kmeans_objective(data, &centroids)?);
    }
    Ok(ClusteringResult {
        objective: *trace.last().unwrap(),
        centroids,
        trace,
        scales: Vec::new(),
        ledger: None,
    })
}

/// Private k-means over points expressed in attribute-index coordinates of
/// the policy's domain.
///
/// Each iteration spends `epsilon / iterations`, shared between noisy cluster
/// sizes and noisy coordinate sums. A cluster whose noisy size falls below
/// one half is treated as empty and keeps its centroid; otherwise the
/// centroid is the noisy sum over `max(noisy size, 1)`, clamped to the
/// domain box.
pub fn kmeans_private(data: &[Vec<f64>], cfg: &KmeansConfig, policy: &Policy, pp: &PrivacyParams) -> Result<ClusteringResult> {
    kmeans_private_with(data, cfg, policy, pp.epsilon, &pp.noise())
}

pub fn kmeans_private_with(
    data: &[Vec<f64>],
    cfg: &KmeansConfig,
    policy: &Policy,
    epsilon: f64,
    noise: &NoiseSource,
) -> Result<ClusteringResult> {
    cfg.validate()?;
    check_epsilon(epsilon)?;
    let d = dims_of(data)?;
    let bounds = domain_box(policy);
    if bounds.len() != d {
        return Err(Error::InvalidDataset(format!("points have {d} coordinates, domain has {}", bounds.len())));
    }
    let sum_sens = closed_form_sensitivity(&QueryKind::KmeansSum { k: cfg.k }, policy)?.finite()?;

    let per_iter = epsilon / cfg.iterations as f64;
    let (eps_size, eps_sum) = (per_iter * cfg.size_share, per_iter * (1.0 - cfg.size_share));
    let scales = IterationScales {
        size: SIZE_SENSITIVITY / eps_size,
        sum: sum_sens / eps_sum,
    };
    let mut ledger = BudgetLedger::new();
    let mut centroids = initial_centroids(data, cfg, &bounds, noise)?;
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let (sizes, sums) = cluster_stats(data, &centroids);
        for (c, (size, sum)) in sizes.iter().zip(sums).enumerate() {
            let key = |slot: u64| [TAG_KMEANS, it as u64, c as u64, slot];
            let noisy_size = size + noise.laplace(&key(0), scales.size)?;
            if noisy_size < 0.5 {
                continue;
            }
            let denom = noisy_size.max(1.0);
            for (j, s) in sum.into_iter().enumerate() {
                let noisy = s + noise.laplace(&key(j as u64 + 1), scales.sum)?;
                centroids[c][j] = (noisy / denom).clamp(bounds[j].0, bounds[j].1);
            }
        }
        ledger.charge(format!("iteration {}: sizes", it + 1), eps_size);
        ledger.charge(format!("iteration {}: sums", it + 1), eps_sum);
        trace.push(kmeans_objective(data, &centroids)?);
    }
    Ok(ClusteringResult {
        objective: *trace.last().unwrap(),
        centroids,
        trace,
        scales: vec![scales; cfg.iterations],
        ledger: Some(ledger),
    })
}

/// `[0, cardinality - 1]` per attribute.
pub fn domain_box(policy: &Policy) -> Vec<(f64, f64)> {
    policy
        .domain()
        .cardinalities()
        .into_iter()
        .map(|c| (0.0, (c - 1) as f64))
        .collect()
}
