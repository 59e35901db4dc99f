//! Seeded Monte-Carlo experiments: workloads, synthetic data, error metrics
//! and CSV reports.

use rand::distr::{Distribution, Uniform};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{DomainSpec, Histogram};
use crate::error::{Error, Result};
use crate::kmeans::{domain_box, kmeans_nonprivate_in, kmeans_private, Init, KmeansConfig};
use crate::mechanisms::{
    build_hierarchical_release, build_oh_release, laplace_mechanism, optimal_budget_split, ordered_mechanism_with,
    NoiseSource, PrefixRelease, PrivacyParams,
};
use crate::policy::{Policy, SecretGraph};
use crate::sensitivity::{closed_form_sensitivity, histogram_sensitivity, QueryKind};

/// Mean over estimates of the summed squared error.
pub fn mse(truth: &[f64], estimates: &[Vec<f64>]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates".into()));
    }
    let mut total = 0.0;
    for e in estimates {
        if e.len() != truth.len() {
            return Err(Error::InvalidParameter(format!("estimate has {} components, truth has {}", e.len(), truth.len())));
        }
        total += e.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / estimates.len() as f64)
}

/// Range queries `(i, j)` with `1 <= i <= j <= domain_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub domain_size: usize,
    pub seed: u64,
    pub queries: Vec<(usize, usize)>,
}

/// `count` queries drawn uniformly from all ranges of the domain.
pub fn random_range_workload(domain_size: usize, count: usize, seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(count);
    if domain_size > 0 {
        let pos = Uniform::new_inclusive(1, domain_size).unwrap();
        while queries.len() < count {
            let (i, j) = (pos.sample(&mut rng), pos.sample(&mut rng));
            if i <= j {
                queries.push((i, j));
            }
        }
    }
    Workload {
        domain_size,
        seed,
        queries,
    }
}

/// Mean squared error of a release over a workload; `truth` holds the exact
/// prefix counts.
pub fn range_mse<R: PrefixRelease + ?Sized>(release: &R, truth: &[f64], workload: &Workload) -> f64 {
    if workload.queries.is_empty() {
        return 0.0;
    }
    let total: f64 = workload
        .queries
        .iter()
        .map(|&(i, j)| {
            let exact = truth[j - 1] - if i > 1 { truth[i - 2] } else { 0.0 };
            (release.range(i, j) - exact).powi(2)
        })
        .sum();
    total / workload.queries.len() as f64
}

/// Points around `k` uniform centers in `(0,1)^dims` with Gaussian noise,
/// clipped to `[0, 1]`.
pub fn synth_clusters(n: usize, dims: usize, k: usize, sigma: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || dims == 0 || k == 0 {
        return Err(Error::InvalidParameter("n, dims and k must be positive".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect();
    Ok((0..n)
        .map(|i| {
            centers[i % k]
                .iter()
                .map(|c| (c + normal.sample(&mut rng)).clamp(0.0, 1.0))
                .collect()
        })
        .collect())
}

/// Maps `[0, 1]` coordinates to bin indices `0..bins`.
pub fn discretize(points: &[Vec<f64>], bins: usize) -> Vec<Vec<f64>> {
    let top = bins.saturating_sub(1) as f64;
    points
        .iter()
        .map(|p| p.iter().map(|x| (x.clamp(0.0, 1.0) * top).round()).collect())
        .collect()
}

/// Synthetic 1-D histograms standing in for real attribute distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthHistogram {
    Uniform { size: usize, total: u64 },
    Zipf { size: usize, total: u64, #[serde(default = "one")] exponent: f64 },
    /// Most positions empty; the rest share the tuples uniformly.
    Sparse { size: usize, total: u64, #[serde(default = "zero_fraction")] zero_fraction: f64 },
    Counts { counts: Vec<u64> },
}

fn one() -> f64 {
    1.0
}

fn zero_fraction() -> f64 {
    0.9
}

impl SynthHistogram {
    pub fn generate(&self, seed: u64) -> Result<Histogram> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scatter = |size: usize, total: u64, positions: &[usize], weights: Option<Vec<f64>>, rng: &mut ChaCha8Rng| {
            let mut counts = vec![0u64; size];
            let cum: Option<Vec<f64>> = weights.map(|w| {
                let mut acc = 0.0;
                w.iter().map(|x| { acc += x; acc }).collect()
            });
            for _ in 0..total {
                let slot = match &cum {
                    Some(c) => {
                        let u = rng.random::<f64>() * c[c.len() - 1];
                        c.partition_point(|&x| x <= u).min(c.len() - 1)
                    }
                    None => rng.random_range(0..positions.len()),
                };
                counts[positions[slot]] += 1;
            }
            Histogram::from_counts(counts)
        };
        let check = |size: usize| {
            if size == 0 {
                Err(Error::InvalidExperiment("histogram size must be positive".into()))
            } else {
                Ok(())
            }
        };
        match self {
            Self::Uniform { size, total } => {
                check(*size)?;
                Ok(scatter(*size, *total, &(0..*size).collect::<Vec<_>>(), None, &mut rng))
            }
            Self::Zipf { size, total, exponent } => {
                check(*size)?;
                let w = (1..=*size).map(|r| (r as f64).powf(-exponent)).collect();
                Ok(scatter(*size, *total, &(0..*size).collect::<Vec<_>>(), Some(w), &mut rng))
            }
            Self::Sparse { size, total, zero_fraction } => {
                check(*size)?;
                if !(0.0..1.0).contains(zero_fraction) {
                    return Err(Error::InvalidExperiment("zero_fraction must lie in [0, 1)".into()));
                }
                let live = ((*size as f64 * (1.0 - zero_fraction)).round() as usize).clamp(1, *size);
                let mut pos = sample(&mut rng, *size, live).into_vec();
                pos.sort_unstable();
                Ok(scatter(*size, *total, &pos, None, &mut rng))
            }
            Self::Counts { counts } => {
                check(counts.len())?;
                Ok(Histogram::from_counts(counts.clone()))
            }
        }
    }
}

/// Release mechanisms compared by the range and CDF experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    /// Noisy histogram, ranges summed from noisy counts.
    Laplace,
    Ordered,
    OrderedHierarchical,
    Hierarchical,
}

impl MechanismKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "laplace" => Self::Laplace,
            "ordered" => Self::Ordered,
            "oh" | "ordered-hierarchical" => Self::OrderedHierarchical,
            "hierarchical" => Self::Hierarchical,
            other => return Err(Error::InvalidExperiment(format!("unknown mechanism `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Laplace => "laplace",
            Self::Ordered => "ordered",
            Self::OrderedHierarchical => "oh",
            Self::Hierarchical => "hierarchical",
        }
    }

    fn uses_theta(&self) -> bool {
        matches!(self, Self::Ordered | Self::OrderedHierarchical)
    }
}

struct Prefixes(Vec<f64>);

impl PrefixRelease for Prefixes {
    fn prefixes(&self) -> &[f64] {
        &self.0
    }
}

/// One release of `h` as prefix estimates.
pub fn release_prefixes(
    mechanism: MechanismKind,
    h: &Histogram,
    epsilon: f64,
    theta: usize,
    fanout: usize,
    seed: u64,
    clamp: bool,
) -> Result<Vec<f64>> {
    let noise = NoiseSource::new(seed);
    Ok(match mechanism {
        MechanismKind::Laplace => {
            let noisy = laplace_mechanism(&h.to_f64(), 2.0, &PrivacyParams::new(epsilon, seed)?)?;
            let mut acc = 0.0;
            noisy.into_iter().map(|x| { acc += x; acc }).collect()
        }
        MechanismKind::Ordered => ordered_mechanism_with(h, theta as u64, epsilon, &noise, clamp)?.inferred,
        MechanismKind::OrderedHierarchical => {
            let s = optimal_budget_split(h.len(), theta, fanout, epsilon)?;
            let t = build_oh_release(h, theta, fanout, s.eps_s, s.eps_h, seed)?;
            if clamp {
                t.inferred(true)
            } else {
                t.prefixes().to_vec()
            }
        }
        MechanismKind::Hierarchical => build_hierarchical_release(h, fanout, epsilon, &noise)?.prefixes().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub mechanism: String,
    pub policy: String,
    pub epsilon: Option<f64>,
    pub theta: Option<usize>,
    pub fanout: Option<usize>,
    pub trials: usize,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

pub const CSV_COLUMNS: [&str; 10] =
    ["experiment", "mechanism", "policy", "epsilon", "theta", "fanout", "metric", "mean", "q1", "q3"];

impl ExperimentReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.mechanism.clone(),
                r.policy.clone(),
                opt(r.epsilon.map(|e| e.to_string())),
                opt(r.theta.map(|t| t.to_string())),
                opt(r.fanout.map(|f| f.to_string())),
                r.metric.clone(),
                r.mean.to_string(),
                r.q1.to_string(),
                r.q3.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn row(&self, mechanism: &str, epsilon: Option<f64>, theta: Option<usize>, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.mechanism == mechanism && r.epsilon == epsilon && r.theta == theta && r.metric == metric)
    }
}

/// Mean, median and quartiles (linear interpolation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let x = p * (v.len() - 1) as f64;
        let (lo, hi) = (x.floor() as usize, x.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (x - lo as f64)
    };
    Summary {
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: q(0.5),
        q1: q(0.25),
        q3: q(0.75),
    }
}

fn name_hash(s: &str) -> u64 {
    crate::mechanisms::key_hash(&s.bytes().map(u64::from).collect::<Vec<_>>())
}

/// Seed for one trial, a function of the parameters only, so adding or
/// reordering experiments leaves other rows unchanged.
pub fn derive_seed(global: u64, parts: &[u64]) -> u64 {
    let mut key = vec![global];
    key.extend_from_slice(parts);
    crate::mechanisms::key_hash(&key)
}

fn default_trials() -> usize {
    50
}

fn default_fanout() -> usize {
    16
}

fn default_queries() -> usize {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReleaseConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    trials: usize,
    dataset: SynthHistogram,
    mechanisms: Vec<String>,
    epsilons: Vec<f64>,
    #[serde(default)]
    thetas: Vec<usize>,
    #[serde(default = "default_fanout")]
    fanout: usize,
    #[serde(default = "default_queries")]
    queries: usize,
    #[serde(default)]
    clamp: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KmeansRatioConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default = "default_points")]
    n: usize,
    #[serde(default = "default_dims")]
    dims: usize,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_sigma")]
    sigma: f64,
    #[serde(default = "default_bins")]
    bins: usize,
    #[serde(default = "default_iter")]
    iterations: usize,
    #[serde(default = "default_share")]
    size_share: f64,
    epsilons: Vec<f64>,
    policies: Vec<String>,
}

fn default_points() -> usize {
    1000
}
fn default_dims() -> usize {
    4
}
fn default_k() -> usize {
    4
}
fn default_sigma() -> f64 {
    0.2
}
fn default_bins() -> usize {
    101
}
fn default_iter() -> usize {
    10
}
fn default_share() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedPolicy {
    name: String,
    policy: Value,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensitivityTableConfig {
    #[serde(default)]
    seed: u64,
    policies: Vec<NamedPolicy>,
    queries: Vec<QueryKind>,
}

pub const EXPERIMENTS: [&str; 4] = ["range-mse", "cdf-release", "kmeans-ratio", "sensitivity-table"];

/// Runs the experiment described by a JSON config.
pub fn run_experiment(config: &str) -> Result<ExperimentReport> {
    let mut value: Value = serde_json::from_str(config)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidExperiment("config must be a JSON object".into()))?;
    let name = obj
        .remove("experiment")
        .and_then(|v| v.as_str().map(str::to_string))
        .ok_or_else(|| Error::InvalidExperiment("missing `experiment`".into()))?;
    let parse_err = |e: serde_json::Error| Error::InvalidExperiment(e.to_string());
    match name.as_str() {
        "range-mse" | "cdf-release" => {
            let cfg: ReleaseConfig = serde_json::from_value(value).map_err(parse_err)?;
            run_release(&name, &cfg)
        }
        "kmeans-ratio" => run_kmeans(&serde_json::from_value(value).map_err(parse_err)?),
        "sensitivity-table" => run_sensitivity(&serde_json::from_value(value).map_err(parse_err)?),
        other => Err(Error::InvalidExperiment(format!(
            "unknown experiment `{other}` (expected one of {})",
            EXPERIMENTS.join(", ")
        ))),
    }
}

fn run_release(name: &str, cfg: &ReleaseConfig) -> Result<ExperimentReport> {
    let mechanisms = cfg.mechanisms.iter().map(|m| MechanismKind::parse(m)).collect::<Result<Vec<_>>>()?;
    if cfg.trials == 0 {
        return Err(Error::InvalidExperiment("trials must be positive".into()));
    }
    let h = cfg.dataset.generate(derive_seed(cfg.seed, &[name_hash("dataset")]))?;
    let size = h.len();
    let truth = h.cumulative().to_f64();
    let workload = random_range_workload(size, cfg.queries, derive_seed(cfg.seed, &[name_hash("workload"), size as u64]));
    let thetas = if cfg.thetas.is_empty() { vec![1] } else { cfg.thetas.clone() };
    if let Some(t) = thetas.iter().find(|&&t| t == 0 || t > size) {
        return Err(Error::InvalidExperiment(format!("theta {t} outside [1, {size}]")));
    }
    let (metric, policy) = match name {
        "range-mse" => ("range-mse", format!("line |T| = {size}")),
        _ => ("cdf-mse", format!("line |T| = {size}")),
    };

    let mut rows = Vec::new();
    for &eps in &cfg.epsilons {
        PrivacyParams::new(eps, 0)?;
        for &mech in &mechanisms {
            let sweep: Vec<usize> = if mech.uses_theta() { thetas.clone() } else { vec![size] };
            for theta in sweep {
                let errors = (0..cfg.trials)
                    .into_par_iter()
                    .map(|trial| {
                        let seed = derive_seed(
                            cfg.seed,
                            &[name_hash(name), name_hash(mech.name()), eps.to_bits(), theta as u64, trial as u64],
                        );
                        let p = release_prefixes(mech, &h, eps, theta, cfg.fanout, seed, cfg.clamp)?;
                        Ok(if metric == "range-mse" {
                            range_mse(&Prefixes(p), &truth, &workload)
                        } else {
                            mse(&truth, &[p])?
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let s = summarize(&errors);
                rows.push(ReportRow {
                    experiment: name.to_string(),
                    mechanism: mech.name().to_string(),
                    policy: policy.clone(),
                    epsilon: Some(eps),
                    theta: Some(theta),
                    fanout: matches!(mech, MechanismKind::OrderedHierarchical | MechanismKind::Hierarchical)
                        .then_some(cfg.fanout),
                    trials: cfg.trials,
                    metric: metric.to_string(),
                    mean: s.mean,
                    median: s.median,
                    q1: s.q1,
                    q3: s.q3,
                });
            }
        }
    }
    Ok(ExperimentReport {
        experiment: name.to_string(),
        seed: cfg.seed,
        rows,
    })
}

/// Parses `full`, `attribute` or `distance:<fraction of the unit range>`.
fn kmeans_graph(spec: &str, bins: usize) -> Result<(SecretGraph, Option<usize>)> {
    match spec.split_once(':') {
        None if spec == "full" => Ok((SecretGraph::Full, None)),
        None if spec == "attribute" => Ok((SecretGraph::Attribute, None)),
        Some(("distance", frac)) => {
            let f: f64 = frac
                .parse()
                .map_err(|_| Error::InvalidExperiment(format!("bad distance threshold `{frac}`")))?;
            let theta = (f * (bins - 1) as f64).round() as u64;
            Ok((SecretGraph::distance(theta), Some(theta as usize)))
        }
        _ => Err(Error::InvalidExperiment(format!("unknown policy `{spec}`"))),
    }
}

fn run_kmeans(cfg: &KmeansRatioConfig) -> Result<ExperimentReport> {
    if cfg.trials == 0 || cfg.bins < 2 {
        return Err(Error::InvalidExperiment("trials must be positive and bins at least 2".into()));
    }
    let domain = DomainSpec::grid(cfg.dims, cfg.bins)?;
    let kcfg = KmeansConfig {
        k: cfg.k,
        iterations: cfg.iterations,
        init: Init::UniformBox,
        size_share: cfg.size_share,
    };
    kcfg.validate()?;
    let mut rows = Vec::new();
    for spec in &cfg.policies {
        let (graph, theta) = kmeans_graph(spec, cfg.bins)?;
        let policy = Policy::unconstrained(domain.clone(), graph)?;
        let bounds = domain_box(&policy);
        for &eps in &cfg.epsilons {
            let pp_check = PrivacyParams::new(eps, 0)?;
            let ratios = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let data_seed = derive_seed(cfg.seed, &[name_hash("kmeans-data"), trial as u64]);
                    let data = discretize(&synth_clusters(cfg.n, cfg.dims, cfg.k, cfg.sigma, data_seed)?, cfg.bins);
                    let init_seed = derive_seed(cfg.seed, &[name_hash("kmeans-init"), trial as u64]);
                    let plain = kmeans_nonprivate_in(&data, &kcfg, init_seed, &bounds)?;
                    let private = kmeans_private(&data, &kcfg, &policy, &PrivacyParams { seed: init_seed, ..pp_check })?;
                    Ok(private.objective / plain.objective)
                })
                .collect::<Result<Vec<f64>>>()?;
            let s = summarize(&ratios);
            rows.push(ReportRow {
                experiment: "kmeans-ratio".into(),
                mechanism: "kmeans".into(),
                policy: spec.clone(),
                epsilon: Some(eps),
                theta,
                fanout: None,
                trials: cfg.trials,
                metric: "objective-ratio".into(),
                mean: s.mean,
                median: s.median,
                q1: s.q1,
                q3: s.q3,
            });
        }
    }
    Ok(ExperimentReport {
        experiment: "kmeans-ratio".into(),
        seed: cfg.seed,
        rows,
    })
}

fn run_sensitivity(cfg: &SensitivityTableConfig) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    for named in &cfg.policies {
        let policy = Policy::from_json(&named.policy.to_string(), None)?;
        for q in &cfg.queries {
            let r = match q {
                QueryKind::CompleteHistogram => histogram_sensitivity(&policy)?,
                _ => closed_form_sensitivity(q, &policy)?,
            };
            rows.push(ReportRow {
                experiment: "sensitivity-table".into(),
                mechanism: format!("{:?}/{:?}", r.method, r.exactness),
                policy: named.name.clone(),
                epsilon: None,
                theta: None,
                fanout: None,
                trials: 1,
                metric: q.name().to_string(),
                mean: r.value,
                median: r.value,
                q1: r.value,
                q3: r.value,
            });
        }
    }
    Ok(ExperimentReport {
        experiment: "sensitivity-table".into(),
        seed: cfg.seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::sample_laplace;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[vec![1.5, 2.5, 3.5]]).unwrap(), 0.75);
        assert!(mse(&[1.0], &[vec![1.0, 2.0]]).is_err());
        assert!(mse(&[1.0], &[]).is_err());
    }

    #[test]
    fn mse_of_laplace_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = 2.0;
        let est: Vec<Vec<f64>> = (0..100_000).map(|_| vec![sample_laplace(b, &mut rng).unwrap()]).collect();
        let m = mse(&[0.0], &est).unwrap();
        assert!((m / (2.0 * b * b) - 1.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn workloads() {
        let w = random_range_workload(50, 500, 3);
        assert_eq!(w, random_range_workload(50, 500, 3));
        assert!(w.queries.iter().all(|&(i, j)| 1 <= i && i <= j && j <= 50));
        assert!(random_range_workload(50, 0, 3).queries.is_empty());
        assert_ne!(w.queries, random_range_workload(50, 500, 4).queries);
    }

    #[test]
    fn workload_is_uniform_over_ranges() {
        // 3 positions give 6 ranges, each with probability 1/6.
        let w = random_range_workload(3, 60_000, 9);
        let diag = w.queries.iter().filter(|(i, j)| i == j).count() as f64 / 60_000.0;
        assert!((diag - 0.5).abs() < 0.01, "{diag}");
    }

    #[test]
    fn clusters() {
        let a = synth_clusters(100, 4, 4, 0.2, 1).unwrap();
        assert_eq!(a, synth_clusters(100, 4, 4, 0.2, 1).unwrap());
        assert!(a.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
        let flat = synth_clusters(12, 2, 3, 0.0, 1).unwrap();
        for i in 3..12 {
            assert_eq!(flat[i], flat[i % 3]);
        }
        assert!(synth_clusters(0, 4, 4, 0.2, 1).is_err());
    }

    #[test]
    fn summary_quartiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.mean, s.median, s.q1, s.q3), (3.0, 3.0, 2.0, 4.0));
    }

    #[test]
    fn synthetic_histograms() {
        let h = SynthHistogram::Sparse { size: 200, total: 1000, zero_fraction: 0.9 }.generate(1).unwrap();
        assert_eq!(h.total(), 1000);
        assert!(h.counts().iter().filter(|&&c| c == 0).count() >= 180);
        let z = SynthHistogram::Zipf { size: 50, total: 5000, exponent: 1.0 }.generate(1).unwrap();
        assert!(z.counts()[0] > z.counts()[49]);
    }

    #[test]
    fn unknown_names_are_errors() {
        assert!(matches!(run_experiment(r#"{"experiment":"nope"}"#), Err(Error::InvalidExperiment(_))));
        let cfg = r#"{"experiment":"range-mse","dataset":{"kind":"uniform","size":8,"total":10},
                      "mechanisms":["bogus"],"epsilons":[1.0]}"#;
        assert!(matches!(run_experiment(cfg), Err(Error::InvalidExperiment(_))));
    }

    #[test]
    fn small_range_experiment_is_deterministic() {
        let cfg = r#"{"experiment":"range-mse","seed":3,"trials":4,"queries":200,
                      "dataset":{"kind":"zipf","size":64,"total":500},
                      "mechanisms":["laplace","ordered","oh","hierarchical"],
                      "epsilons":[0.5,1.0],"thetas":[1,8,64],"fanout":4}"#;
        let a = run_experiment(cfg).unwrap();
        assert_eq!(a.to_csv().unwrap(), run_experiment(cfg).unwrap().to_csv().unwrap());
        assert_eq!(a.rows.len(), 2 * (1 + 3 + 3 + 1));
        assert!(a.to_csv().unwrap().starts_with(&CSV_COLUMNS.join(",")));
    }

    #[test]
    fn rows_do_not_depend_on_neighbours() {
        let one = r#"{"experiment":"cdf-release","seed":3,"trials":3,
                      "dataset":{"kind":"uniform","size":32,"total":100},
                      "mechanisms":["ordered"],"epsilons":[1.0],"thetas":[2]}"#;
        let more = r#"{"experiment":"cdf-release","seed":3,"trials":3,
                      "dataset":{"kind":"uniform","size":32,"total":100},
                      "mechanisms":["laplace","ordered"],"epsilons":[0.5,1.0],"thetas":[1,2]}"#;
        let a = run_experiment(one).unwrap();
        let b = run_experiment(more).unwrap();
        assert_eq!(Some(&a.rows[0]), b.row("ordered", Some(1.0), Some(2), "cdf-mse"));
    }

    #[test]
    fn sensitivity_table() {
        let cfg = r#"{"experiment":"sensitivity-table",
            "policies":[{"name":"line","policy":{"domain":[{"name":"x","size":8}],"graph":{"kind":"distance","theta":2}}}],
            "queries":[{"kind":"complete-histogram"},{"kind":"cumulative-histogram"}]}"#;
        let r = run_experiment(cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].mean, 2.0);
        assert_eq!(r.rows[1].mean, 2.0);
    }
}
