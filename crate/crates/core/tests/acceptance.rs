//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blowfish_core::domain::{AttributeSpec, DomainSpec, Histogram};
use blowfish_core::eval::{random_range_workload, range_mse, run_experiment, synth_clusters, discretize, SynthHistogram};
use blowfish_core::kmeans::{domain_box, kmeans_nonprivate_in, kmeans_private, KmeansConfig};
use blowfish_core::mechanisms::{
    build_hierarchical_release, build_oh_release, build_oh_release_with, isotonic_inference, laplace_mechanism,
    optimal_budget_split, ordered_mechanism_with, split_constants, split_error, NoiseSource, PrefixRelease,
    PrivacyParams,
};
use blowfish_core::policy::{ConstraintSet, CountQuery, DatabaseSpace, Policy, SecretGraph, DEFAULT_BUDGET};
use blowfish_core::sensitivity::{
    alpha_xi, brute_force_sensitivity, brute_force_with_witness, build_policy_graph, closed_form_sensitivity,
    histogram_sensitivity, is_sparse, specialized_constraint_sensitivity, Exactness, Method, QueryKind,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "closed forms equal brute force on unconstrained policies", oracle_equivalence),
        (2, "known two-attribute marginal", known_marginal),
        (3, "Laplace histogram error", laplace_error),
        (4, "ordered mechanism range error", ordered_bound),
        (5, "budget split optimality", budget_split),
        (6, "structural degeneracies of the OH tree", degeneracies),
        (7, "isotonic inference optimality", isotonic_optimality),
        (8, "specialized sensitivities confirmed by brute force", specialized),
        (9, "k-means trend and vanishing noise", kmeans_trend),
        (10, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_policy(rng: &mut ChaCha8Rng, kind: usize) -> Policy {
    let domain = if rng.random_bool(0.5) {
        DomainSpec::line("x", rng.random_range(2..=6)).unwrap()
    } else {
        let (a, b) = [(2, 2), (2, 3), (3, 2)][rng.random_range(0..3)];
        DomainSpec::new(vec![AttributeSpec::ordinal("a", a), AttributeSpec::ordinal("b", b)]).unwrap()
    };
    let size = domain.size();
    let graph = match kind {
        0 => SecretGraph::Full,
        1 => SecretGraph::Attribute,
        2 => SecretGraph::partition((0..size).map(|_| rng.random_range(0..3)).collect()),
        3 => SecretGraph::distance(rng.random_range(0..=3)),
        _ => {
            let mut edges = Vec::new();
            for a in 0..size {
                for b in a + 1..size {
                    if rng.random_bool(0.4) {
                        edges.push((a, b));
                    }
                }
            }
            SecretGraph::explicit(edges)
        }
    };
    Policy::unconstrained(domain, graph).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = 0;
    for i in 0..50 {
        let p = random_policy(&mut rng, i % 5);
        let n = rng.random_range(1..=3);
        let size = p.domain().size();
        let queries = vec![
            QueryKind::CompleteHistogram,
            QueryKind::PartitionHistogram { cells: (0..size).map(|_| rng.random_range(0..3)).collect() },
            QueryKind::CumulativeHistogram,
            QueryKind::LinearSum {
                weights: (0..n).map(|_| f64::from(rng.random_range(-3i32..=3))).collect(),
                low: 0.0,
                high: (size - 1) as f64,
            },
            QueryKind::KmeansSize { k: rng.random_range(1..=3) },
        ];
        for q in &queries {
            let closed = closed_form_sensitivity(q, &p).map_err(|e| e.to_string())?;
            let brute = brute_force_sensitivity(q, &p, n, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
            ensure(
                closed.value == brute.value,
                format!("policy {i} ({}), n = {n}, {}: closed {} vs brute {}", p.summary(), q.name(), closed.value, brute.value),
            )?;
            checks += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("50 policies, {checks} query/policy pairs equal"))
}

fn marginal_domain() -> DomainSpec {
    DomainSpec::new(vec![
        AttributeSpec::new("A1", &["a1", "a2"]),
        AttributeSpec::new("A2", &["b1", "b2"]),
        AttributeSpec::new("A3", &["c1", "c2", "c3"]),
    ])
    .unwrap()
}

fn known_marginal() -> Outcome {
    let start = Instant::now();
    let d = marginal_domain();
    let qs = ConstraintSet::marginal(&d, &[0, 1], Some(&[1, 1, 1, 1])).unwrap();
    ensure(is_sparse(&qs, &SecretGraph::Full, &d).unwrap(), "marginal is not sparse")?;
    let p = Policy::new(d, SecretGraph::Full, qs).unwrap();
    let g = build_policy_graph(&p).unwrap();
    let mut expected: Vec<(usize, usize)> =
        (0..4).flat_map(|a| (0..4).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    expected.push((g.plus(), g.minus()));
    expected.sort_unstable();
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    edges.sort_unstable();
    ensure(edges == expected, format!("policy graph edges {edges:?}"))?;
    let (alpha, xi) = alpha_xi(&g).unwrap();
    ensure((alpha, xi) == (4, 1), format!("alpha {alpha}, xi {xi}"))?;
    let s = histogram_sensitivity(&p).unwrap();
    ensure(s.value == 8.0 && s.method == Method::SparseEngine, format!("sensitivity {s}"))?;

    let space = DatabaseSpace::new(&p, 4, DEFAULT_BUDGET).unwrap();
    let members = space.members().len();
    ensure(members <= 2000, format!("{members} databases"))?;
    let (brute, witness) = brute_force_with_witness(&QueryKind::CompleteHistogram, &p, 4, DEFAULT_BUDGET).unwrap();
    let w = witness.ok_or("no neighbors")?;
    let h1 = Histogram::from_dataset(p.domain(), &w.d1).unwrap();
    let h2 = Histogram::from_dataset(p.domain(), &w.d2).unwrap();
    let l1: u64 = h1.counts().iter().zip(h2.counts()).map(|(a, b)| a.abs_diff(*b)).sum();
    ensure(brute.value == 8.0 && l1 == 8, format!("brute force {} (witness L1 {l1})", brute.value))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!("12 query edges + (v+, v-), alpha 4, xi 1, {s}; brute force over {members} databases finds L1 = 8"))
}

fn laplace_error() -> Outcome {
    let size = 64;
    let p = Policy::unconstrained(DomainSpec::line("x", size).unwrap(), SecretGraph::Full).unwrap();
    let sens = closed_form_sensitivity(&QueryKind::CompleteHistogram, &p).unwrap().value;
    let truth: Vec<f64> = (0..size).map(|i| ((i * 13) % 7) as f64).collect();
    let trials = 1000;
    let mut total = 0.0;
    for t in 0..trials {
        let noisy = laplace_mechanism(&truth, sens, &PrivacyParams::new(1.0, t).unwrap()).unwrap();
        total += noisy.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    let mse = total / trials as f64;
    let target = 8.0 * size as f64;
    ensure((mse / target - 1.0).abs() <= 0.10, format!("MSE {mse:.1} vs {target}"))?;
    Ok(format!("MSE {mse:.1}, target {target} (+-10%)"))
}

fn ordered_bound() -> Outcome {
    let size = 1024;
    let h = SynthHistogram::Zipf { size, total: 20_000, exponent: 0.8 }.generate(5).unwrap();
    let truth = h.cumulative().to_f64();
    let workload = random_range_workload(size, 10_000, 77);
    let releases = 10;
    let mut parts = Vec::new();
    for eps in [0.5, 1.0] {
        let (mut ordered, mut baseline) = (0.0, 0.0);
        for r in 0..releases {
            let noise = NoiseSource::new(1000 + r);
            let o = ordered_mechanism_with(&h, 1, eps, &noise, false).unwrap();
            ordered += range_mse(&o, &truth, &workload);
            let b = build_hierarchical_release(&h, 16, eps, &noise).unwrap();
            baseline += range_mse(&b, &truth, &workload);
        }
        let (ordered, baseline) = (ordered / releases as f64, baseline / releases as f64);
        let bound = 4.0 / (eps * eps);
        ensure(ordered <= 1.1 * bound, format!("eps {eps}: ordered MSE {ordered:.2} > 1.1 * {bound}"))?;
        ensure(ordered < baseline / 10.0, format!("eps {eps}: ordered {ordered:.2} vs baseline {baseline:.1}"))?;
        parts.push(format!("eps {eps}: ordered {ordered:.2} (bound {bound}), baseline {baseline:.1}"));
    }
    Ok(parts.join("; "))
}

/// Configurations with theta a power of the fanout and at most 1/16 of the domain.
pub const SPLIT_CONFIGS: [(usize, usize, usize); 20] = [
    (256, 2, 2),
    (256, 4, 2),
    (256, 8, 2),
    (256, 16, 2),
    (256, 4, 4),
    (256, 8, 8),
    (512, 2, 2),
    (512, 4, 2),
    (512, 8, 2),
    (512, 16, 2),
    (512, 32, 2),
    (512, 4, 4),
    (512, 16, 4),
    (512, 8, 8),
    (512, 16, 16),
    (1024, 4, 2),
    (1024, 16, 2),
    (1024, 64, 2),
    (1024, 16, 4),
    (1024, 16, 16),
];

fn budget_split() -> Outcome {
    let eps = 1.0;
    let mut worst_grid: f64 = 0.0;
    let mut worst_mse: f64 = 0.0;
    for (n, theta, f) in SPLIT_CONFIGS {
        let s = optimal_budget_split(n, theta, f, eps).unwrap();
        let (c1, c2) = split_constants(n, theta, f).unwrap();
        let steps = 100_000;
        let grid = (1..steps)
            .map(|i| eps * i as f64 / steps as f64)
            .min_by(|a, b| split_error(c1, c2, *a, eps - a).total_cmp(&split_error(c1, c2, *b, eps - b)))
            .unwrap();
        let gap = (grid - s.eps_s).abs();
        worst_grid = worst_grid.max(gap);
        ensure(gap <= 1e-3 * eps, format!("({n}, {theta}, {f}): closed form {} vs grid {grid}", s.eps_s))?;

        let h = SynthHistogram::Uniform { size: n, total: 5 * n as u64 }.generate(n as u64).unwrap();
        let truth = h.cumulative().to_f64();
        let workload = random_range_workload(n, 10_000, 31 + n as u64);
        let releases = 40;
        let mse = (0..releases)
            .map(|r| {
                let t = build_oh_release(&h, theta, f, s.eps_s, s.eps_h, 500 + r).unwrap();
                range_mse(&t, &truth, &workload)
            })
            .sum::<f64>()
            / releases as f64;
        let rel = mse / s.predicted_mse - 1.0;
        if rel.abs() > worst_mse.abs() {
            worst_mse = rel;
        }
        ensure(
            rel.abs() <= 0.15,
            format!("({n}, {theta}, {f}): empirical {mse:.1} vs predicted {:.1}", s.predicted_mse),
        )?;
    }
    Ok(format!(
        "20 configs; max |closed - grid| = {worst_grid:.1e}; worst empirical/predicted deviation {:+.1}%",
        100.0 * worst_mse
    ))
}

fn degeneracies() -> Outcome {
    for (n, f, seed) in [(256, 2, 1), (200, 16, 2), (1000, 4, 3)] {
        let h = SynthHistogram::Zipf { size: n, total: 3000, exponent: 1.0 }.generate(seed).unwrap();
        let s = optimal_budget_split(n, n, f, 0.8).unwrap();
        let oh = build_oh_release(&h, n, f, s.eps_s, s.eps_h, seed).unwrap();
        let base = build_hierarchical_release(&h, f, 0.8, &NoiseSource::new(seed)).unwrap();
        let key = |nodes: &[blowfish_core::mechanisms::TreeNode]| {
            let mut v: Vec<(usize, usize, u64, u64)> =
                nodes.iter().map(|x| (x.start, x.end, x.scale.to_bits(), x.noisy.to_bits())).collect();
            v.sort_unstable();
            v
        };
        ensure(key(oh.nodes()) == key(base.nodes()), format!("theta = |T| = {n}, f = {f}: trees differ"))?;
        ensure(oh.prefixes() == base.prefixes(), "prefix answers differ")?;
    }
    for (n, eps, seed) in [(300, 0.7, 9), (64, 2.0, 10)] {
        let h = SynthHistogram::Uniform { size: n, total: 900 }.generate(seed).unwrap();
        let s = optimal_budget_split(n, 1, 2, eps).unwrap();
        let oh = build_oh_release(&h, 1, 2, s.eps_s, s.eps_h, seed).unwrap();
        let ordered = ordered_mechanism_with(&h, 1, eps, &NoiseSource::new(seed), false).unwrap();
        ensure(oh.prefixes() == &ordered.noisy[..], format!("theta = 1, |T| = {n}: noisy prefixes differ"))?;
        ensure(oh.inferred(false) == ordered.inferred, "inferred prefixes differ")?;
    }
    Ok("OH(theta=|T|) matches the hierarchical baseline node for node; OH(theta=1) matches the ordered mechanism".into())
}

/// Optimum over every split into contiguous blocks set to their means.
fn exhaustive_isotonic(y: &[f64]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 0u32..(1 << (n - 1)) {
        let mut candidate = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            if i == n - 1 || mask & (1 << i) != 0 {
                let mean = y[start..=i].iter().sum::<f64>() / (i + 1 - start) as f64;
                candidate.extend(std::iter::repeat_n(mean, i + 1 - start));
                start = i + 1;
            }
        }
        if candidate.windows(2).all(|w| w[0] <= w[1]) {
            let cost: f64 = candidate.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
            if cost < best.1 {
                best = (candidate, cost);
            }
        }
    }
    best
}

fn isotonic_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let len = rng.random_range(1..=8);
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let out = isotonic_inference(&y);
        let (best, cost) = exhaustive_isotonic(&y);
        let got: f64 = out.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let diff = out.iter().zip(&best).fold((got - cost).abs(), |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff);
        ensure(diff <= 1e-6, format!("input {y:?}: {out:?} vs {best:?}"))?;
    }
    Ok(format!("200 sequences, max deviation {worst:.1e}"))
}

fn specialized() -> Outcome {
    let mut parts = Vec::new();

    let d = DomainSpec::new(vec![AttributeSpec::ordinal("A1", 3), AttributeSpec::ordinal("A2", 2)]).unwrap();
    let q = ConstraintSet::marginal(&d, &[0], Some(&[1, 1, 1])).unwrap();
    let marginal = Policy::new(d, SecretGraph::Full, q).unwrap();

    let d = DomainSpec::new(vec![
        AttributeSpec::ordinal("A", 3),
        AttributeSpec::ordinal("B", 2),
        AttributeSpec::ordinal("C", 2),
    ])
    .unwrap();
    let mut q = ConstraintSet::marginal(&d, &[0], Some(&[1, 1, 1])).unwrap();
    q.extend(ConstraintSet::marginal(&d, &[1], Some(&[2, 1])).unwrap());
    let disjoint = Policy::new(d, SecretGraph::Attribute, q).unwrap();

    let d = DomainSpec::new(vec![AttributeSpec::ordinal("row", 3), AttributeSpec::ordinal("col", 4)]).unwrap();
    let q = ConstraintSet::new(vec![
        CountQuery::rectangle(&d, &[(0, 0), (0, 1)], Some(1)).unwrap(),
        CountQuery::rectangle(&d, &[(1, 1), (0, 1)], Some(1)).unwrap(),
        CountQuery::rectangle(&d, &[(0, 1), (3, 3)], Some(0)).unwrap(),
    ]);
    let rects = Policy::new(d, SecretGraph::distance(1), q).unwrap();

    for (name, p, expected) in [("marginal", marginal, 6.0), ("disjoint marginals", disjoint, 6.0), ("rectangles", rects, 6.0)] {
        ensure(p.domain().size() <= 12, "domain too large")?;
        let s = specialized_constraint_sensitivity(&p).map_err(|e| format!("{name}: {e}"))?;
        let brute = brute_force_sensitivity(&QueryKind::CompleteHistogram, &p, 3, DEFAULT_BUDGET).unwrap();
        ensure(
            s.value == expected && s.exactness == Exactness::Exact && brute.value == s.value,
            format!("{name}: specialized {s} vs brute force {}", brute.value),
        )?;
        parts.push(format!("{name} {} = brute force", s.value));
    }
    Ok(parts.join(", "))
}

fn kmeans_trend() -> Outcome {
    let cfg = r#"{"experiment":"kmeans-ratio","seed":11,"trials":50,"n":1000,"dims":4,"k":4,"sigma":0.2,
                  "bins":101,"iterations":10,"epsilons":[0.2],"policies":["distance:0.25","full"]}"#;
    let report = run_experiment(cfg).map_err(|e| e.to_string())?;
    let dist = report.rows[0].median;
    let full = report.rows[1].median;
    ensure(dist < full, format!("median ratio distance {dist:.2} vs full {full:.2}"))?;

    let domain = DomainSpec::grid(4, 101).unwrap();
    let mut worst: f64 = 0.0;
    for graph in [SecretGraph::distance(25), SecretGraph::Full] {
        let p = Policy::unconstrained(domain.clone(), graph).unwrap();
        for trial in 0..5 {
            let data = discretize(&synth_clusters(1000, 4, 4, 0.2, trial).unwrap(), 101);
            let kcfg = KmeansConfig::new(4);
            let plain = kmeans_nonprivate_in(&data, &kcfg, trial, &domain_box(&p)).unwrap();
            let private = kmeans_private(&data, &kcfg, &p, &PrivacyParams::new(1e6, trial).unwrap()).unwrap();
            let diff = plain
                .centroids
                .iter()
                .flatten()
                .zip(private.centroids.iter().flatten())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(diff);
        }
    }
    ensure(worst <= 1e-3, format!("eps = 1e6 deviates by {worst:.2e}"))?;
    Ok(format!(
        "median objective ratio {dist:.2} (distance 0.25) < {full:.2} (full); eps = 1e6 max deviation {worst:.1e}"
    ))
}

fn determinism() -> Outcome {
    let h = SynthHistogram::Zipf { size: 200, total: 2000, exponent: 1.0 }.generate(3).unwrap();
    let releases = || -> Vec<String> {
        let pp = PrivacyParams::new(0.5, 42).unwrap();
        let s = optimal_budget_split(200, 8, 2, 0.5).unwrap();
        let data = discretize(&synth_clusters(200, 2, 3, 0.2, 1).unwrap(), 21);
        let p = Policy::unconstrained(DomainSpec::grid(2, 21).unwrap(), SecretGraph::distance(3)).unwrap();
        vec![
            serde_json::to_string(&laplace_mechanism(&h.to_f64(), 2.0, &pp).unwrap()).unwrap(),
            serde_json::to_string(&ordered_mechanism_with(&h, 2, 0.5, &pp.noise(), true).unwrap()).unwrap(),
            serde_json::to_string(&build_oh_release_with(&h, 8, 2, s.eps_s, s.eps_h, &pp.noise()).unwrap()).unwrap(),
            serde_json::to_string(&build_hierarchical_release(&h, 4, 0.5, &pp.noise()).unwrap()).unwrap(),
            serde_json::to_string(&kmeans_private(&data, &KmeansConfig::new(3), &p, &pp).unwrap()).unwrap(),
            run_experiment(
                r#"{"experiment":"range-mse","seed":5,"trials":6,"queries":300,
                    "dataset":{"kind":"sparse","size":128,"total":400},
                    "mechanisms":["laplace","ordered","oh","hierarchical"],"epsilons":[0.5],"thetas":[1,4,128],"fanout":4}"#,
            )
            .unwrap()
            .to_csv()
            .unwrap(),
            run_experiment(
                r#"{"experiment":"kmeans-ratio","seed":5,"trials":6,"n":200,"epsilons":[0.5],"policies":["full","distance:0.1"]}"#,
            )
            .unwrap()
            .to_csv()
            .unwrap(),
        ]
    };
    let first = releases();
    ensure(first == releases(), "repeated run differs")?;
    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    ensure(first == pool(1).install(releases), "single-threaded run differs")?;
    ensure(first == pool(4).install(releases), "four-thread run differs")?;
    Ok(format!("{} artifacts byte-identical across repeats and 1/4-thread pools", first.len()))
}
