mod output;

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use blowfish_core::domain::{ingest_dataset, Dataset, DomainSpec, Histogram};
use blowfish_core::eval::run_experiment;
use blowfish_core::kmeans::{kmeans_private, KmeansConfig};
use blowfish_core::mechanisms::{
    build_oh_release, compose_budgets, laplace_release, optimal_budget_split, ordered_mechanism, BudgetLedger,
    PrivacyParams,
};
use blowfish_core::policy::Policy;
use blowfish_core::sensitivity::{closed_form_sensitivity, histogram_sensitivity, Exactness, QueryKind, SensitivityResult};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use output::{emit, read, Artifact, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] blowfish_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot read {0}: {1}")]
    Read(String, std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("sensitivity is not exact ({0}); rerun without --require-exact to accept the upper bound")]
    NotExact(SensitivityResult),
}

/// Differentially private releases under Blowfish privacy policies.
#[derive(Debug, Parser)]
#[command(name = "blowfish", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect policy files.
    #[command(subcommand)]
    Policy(PolicyCommand),
    /// Sensitivity of a query under a policy.
    Sensitivity(SensitivityArgs),
    /// Release noisy statistics of a dataset.
    #[command(subcommand)]
    Release(ReleaseCommand),
    /// Private k-means over a dataset.
    Kmeans(KmeansArgs),
    /// Run a configured experiment.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Privacy budget accounting.
    #[command(subcommand)]
    Budget(BudgetCommand),
}

#[derive(Debug, Subcommand)]
enum PolicyCommand {
    /// Parse and check a policy, printing a summary.
    Validate(PolicyOnlyArgs),
}

#[derive(Debug, Subcommand)]
enum ReleaseCommand {
    /// Complete histogram with Laplace noise.
    Histogram(HistogramArgs),
    /// Cumulative histogram.
    Cdf(CdfArgs),
    /// Range counts answered from a cumulative release.
    Range(RangeArgs),
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    Run(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
enum BudgetCommand {
    /// Total epsilon spent by a ledger.
    Total(BudgetArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct PolicyOpts {
    /// Policy file (JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Domain file (JSON), used when the policy has no `domain` field.
    #[arg(long)]
    domain: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OutputOpts {
    /// Output file, written atomically. Stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct NoiseOpts {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct PolicyOnlyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    policy: PolicyOpts,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum QueryName {
    Histogram,
    Cumulative,
    KmeansSize,
    KmeansSum,
}

#[derive(Debug, Args, Serialize)]
struct SensitivityArgs {
    #[arg(long, value_enum)]
    query: QueryName,
    /// Number of clusters for the k-means queries.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    policy: PolicyOpts,
    #[arg(long)]
    require_exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Args, Serialize)]
struct HistogramArgs {
    #[command(flatten)]
    #[serde(flatten)]
    policy: PolicyOpts,
    /// Dataset (CSV with a header naming the attributes).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseOpts,
    /// Refuse to release when the sensitivity is only an upper bound.
    #[arg(long)]
    require_exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PrefixMechanism {
    Ordered,
    Oh,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PrefixOpts {
    #[command(flatten)]
    #[serde(flatten)]
    policy: PolicyOpts,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseOpts,
    /// Distance threshold. Defaults to the policy's cumulative sensitivity.
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long, default_value_t = 16)]
    fanout: usize,
    #[arg(long, value_enum)]
    mechanism: Option<PrefixMechanism>,
    #[arg(long)]
    require_exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Args, Serialize)]
struct CdfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    opts: PrefixOpts,
}

#[derive(Debug, Args, Serialize)]
struct RangeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    opts: PrefixOpts,
    /// Inclusive 1-based ranges such as `1:10,5:20`.
    #[arg(long, value_delimiter = ',', required = true)]
    ranges: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct KmeansArgs {
    #[command(flatten)]
    #[serde(flatten)]
    policy: PolicyOpts,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    noise: NoiseOpts,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Share of each iteration's budget spent on cluster sizes.
    #[arg(long, default_value_t = 0.5)]
    size_share: f64,
    #[arg(long)]
    require_exact: bool,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

#[derive(Debug, Args, Serialize)]
struct BudgetArgs {
    /// Ledger file (JSON).
    #[arg(long)]
    ledger: PathBuf,
    /// Policy used to verify parallel groups.
    #[command(flatten)]
    #[serde(flatten)]
    policy: PolicyOpts,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputOpts,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Policy(PolicyCommand::Validate(a)) => policy_validate(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Release(ReleaseCommand::Histogram(a)) => release_histogram(a),
        Command::Release(ReleaseCommand::Cdf(a)) => release_cdf(a),
        Command::Release(ReleaseCommand::Range(a)) => release_range(a),
        Command::Kmeans(a) => kmeans(a),
        Command::Experiment(ExperimentCommand::Run(a)) => experiment(a),
        Command::Budget(BudgetCommand::Total(a)) => budget_total(a),
    }
}

fn load_domain(opts: &PolicyOpts) -> Result<Option<DomainSpec>, CliError> {
    opts.domain
        .as_deref()
        .map(|p| Ok(DomainSpec::from_json(&read(p)?)?))
        .transpose()
}

fn load_policy(opts: &PolicyOpts) -> Result<Option<Policy>, CliError> {
    let domain = load_domain(opts)?;
    opts.policy
        .as_deref()
        .map(|p| Ok(Policy::from_json(&read(p)?, domain.as_ref())?))
        .transpose()
}

fn require_policy(opts: &PolicyOpts) -> Result<Policy, CliError> {
    load_policy(opts)?.ok_or_else(|| CliError::Usage("--policy is required".into()))
}

fn load_data(path: &PathBuf, domain: &DomainSpec) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Read(path.display().to_string(), e))?;
    Ok(ingest_dataset(file, domain)?)
}

fn check_exact(s: &SensitivityResult, require_exact: bool) -> Result<(), CliError> {
    s.finite()?;
    if require_exact && s.exactness != Exactness::Exact {
        return Err(CliError::NotExact(*s));
    }
    Ok(())
}

fn point_label(domain: &DomainSpec, rank: usize) -> String {
    domain
        .coords(rank)
        .iter()
        .zip(domain.attributes())
        .map(|(&c, a)| a.values()[c].as_str())
        .collect::<Vec<_>>()
        .join("|")
}

fn start(flags: &impl Serialize, command: &str, columns: &[&str]) -> Result<Artifact, CliError> {
    let mut a = Artifact::new(columns);
    a.meta("command", command)?;
    a.meta("version", env!("CARGO_PKG_VERSION"))?;
    a.meta("flags", flags)?;
    Ok(a)
}

/// Text line on stdout by default, an artifact when a format is asked for.
fn emit_text_or(text: String, artifact: Artifact, output: &OutputOpts) -> Result<(), CliError> {
    match output.format {
        None => emit(&(text + "\n"), output.out.as_deref()),
        Some(f) => emit(&artifact.render(f)?, output.out.as_deref()),
    }
}

fn policy_validate(a: PolicyOnlyArgs) -> Result<(), CliError> {
    let p = require_policy(&a.policy)?;
    let mut art = start(&a, "policy validate", &["attribute", "values"])?;
    art.meta("summary", p.summary())?;
    art.meta("constraint_kind", format!("{:?}", p.constraints().kind()))?;
    for attr in p.domain().attributes() {
        art.rows.push(vec![json!(attr.name()), json!(attr.values().join("|"))]);
    }
    emit_text_or(format!("valid: {}", p.summary()), art, &a.output)
}

fn sensitivity(a: SensitivityArgs) -> Result<(), CliError> {
    let p = require_policy(&a.policy)?;
    let s = match a.query {
        QueryName::Histogram => histogram_sensitivity(&p)?,
        QueryName::Cumulative => closed_form_sensitivity(&QueryKind::CumulativeHistogram, &p)?,
        QueryName::KmeansSize => closed_form_sensitivity(&QueryKind::KmeansSize { k: a.k }, &p)?,
        QueryName::KmeansSum => closed_form_sensitivity(&QueryKind::KmeansSum { k: a.k }, &p)?,
    };
    if a.require_exact && s.exactness != Exactness::Exact {
        return Err(CliError::NotExact(s));
    }
    let mut art = start(&a, "sensitivity", &["value", "exactness", "method"])?;
    let v = serde_json::to_value(s)?;
    art.rows.push(vec![v["value"].clone(), v["exactness"].clone(), v["method"].clone()]);
    emit_text_or(s.to_string(), art, &a.output)
}

fn release_histogram(a: HistogramArgs) -> Result<(), CliError> {
    let p = require_policy(&a.policy)?;
    let s = histogram_sensitivity(&p)?;
    check_exact(&s, a.require_exact)?;
    let data = load_data(&a.data, p.domain())?;
    let h = Histogram::from_dataset(p.domain(), &data)?;
    let pp = PrivacyParams::new(a.noise.epsilon, a.noise.seed)?;
    let noisy = laplace_release(&h.to_f64(), &s, &pp)?;

    let mut art = start(&a, "release histogram", &["rank", "point", "value"])?;
    art.meta("mechanism", "laplace")?;
    art.meta("policy", p.summary())?;
    art.meta("epsilon", a.noise.epsilon)?;
    art.meta("seed", a.noise.seed)?;
    art.meta("sensitivity", s)?;
    for (r, v) in noisy.iter().enumerate() {
        art.rows.push(vec![json!(r), json!(point_label(p.domain(), r)), json!(v)]);
    }
    emit(&art.render(a.output.format.unwrap_or(Format::Json))?, a.output.out.as_deref())
}

/// A cumulative release plus the metadata that goes with it.
struct PrefixOutcome {
    domain: DomainSpec,
    prefixes: Vec<f64>,
    meta: Vec<(&'static str, Value)>,
}

fn prefix_release(o: &PrefixOpts, default_mech: PrefixMechanism) -> Result<PrefixOutcome, CliError> {
    let policy = load_policy(&o.policy)?;
    let (domain, sens) = match &policy {
        Some(p) => {
            let s = closed_form_sensitivity(&QueryKind::CumulativeHistogram, p)?;
            check_exact(&s, o.require_exact)?;
            (p.domain().clone(), Some(s))
        }
        None => (
            load_domain(&o.policy)?.ok_or_else(|| CliError::Usage("--policy or --domain is required".into()))?,
            None,
        ),
    };
    let theta = match (o.theta, sens) {
        (Some(t), Some(s)) if (t as f64) < s.value => {
            return Err(CliError::Usage(format!(
                "--theta {t} is below the policy's cumulative sensitivity {}",
                s.value
            )))
        }
        (Some(t), _) => t,
        (None, Some(s)) => (s.value as usize).max(1),
        (None, None) => return Err(CliError::Usage("--theta is required without --policy".into())),
    };
    let data = load_data(&o.data, &domain)?;
    let h = Histogram::from_dataset(&domain, &data)?;
    let mech = o.mechanism.unwrap_or(default_mech);
    let mut meta = vec![
        ("mechanism", serde_json::to_value(mech)?),
        ("policy", json!(policy.as_ref().map(|p| p.summary()))),
        ("epsilon", json!(o.noise.epsilon)),
        ("seed", json!(o.noise.seed)),
        ("theta", json!(theta)),
        ("sensitivity", serde_json::to_value(sens)?),
    ];
    let prefixes = match mech {
        PrefixMechanism::Ordered => {
            let pp = PrivacyParams::new(o.noise.epsilon, o.noise.seed)?;
            ordered_mechanism(&h, theta as u64, &pp)?.inferred
        }
        PrefixMechanism::Oh => {
            let split = optimal_budget_split(h.len(), theta, o.fanout, o.noise.epsilon)?;
            let tree = build_oh_release(&h, theta, o.fanout, split.eps_s, split.eps_h, o.noise.seed)?;
            meta.push(("fanout", json!(o.fanout)));
            meta.push(("eps_s", json!(split.eps_s)));
            meta.push(("eps_h", json!(split.eps_h)));
            meta.push(("predicted_mse", json!(split.predicted_mse)));
            tree.inferred(true)
        }
    };
    Ok(PrefixOutcome { domain, prefixes, meta })
}

fn release_cdf(a: CdfArgs) -> Result<(), CliError> {
    let out = prefix_release(&a.opts, PrefixMechanism::Ordered)?;
    let mut art = start(&a, "release cdf", &["rank", "point", "value"])?;
    for (k, v) in out.meta {
        art.meta(k, v)?;
    }
    for (r, v) in out.prefixes.iter().enumerate() {
        art.rows.push(vec![json!(r), json!(point_label(&out.domain, r)), json!(v)]);
    }
    emit(&art.render(a.opts.output.format.unwrap_or(Format::Json))?, a.opts.output.out.as_deref())
}

fn parse_range(s: &str, size: usize) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("range `{s}` must be i:j with 1 <= i <= j <= {size}"));
    let (i, j) = s.trim().split_once(':').ok_or_else(bad)?;
    let i: usize = i.parse().map_err(|_| bad())?;
    let j: usize = j.parse().map_err(|_| bad())?;
    if i == 0 || i > j || j > size {
        return Err(bad());
    }
    Ok((i, j))
}

fn release_range(a: RangeArgs) -> Result<(), CliError> {
    let out = prefix_release(&a.opts, PrefixMechanism::Oh)?;
    let size = out.prefixes.len();
    let ranges = a.ranges.iter().map(|s| parse_range(s, size)).collect::<Result<Vec<_>, _>>()?;
    let mut art = start(&a, "release range", &["start", "end", "value"])?;
    for (k, v) in out.meta {
        art.meta(k, v)?;
    }
    for (i, j) in ranges {
        let lower = if i > 1 { out.prefixes[i - 2] } else { 0.0 };
        art.rows.push(vec![json!(i), json!(j), json!(out.prefixes[j - 1] - lower)]);
    }
    emit(&art.render(a.opts.output.format.unwrap_or(Format::Json))?, a.opts.output.out.as_deref())
}

fn kmeans(a: KmeansArgs) -> Result<(), CliError> {
    let p = require_policy(&a.policy)?;
    for k in [QueryKind::KmeansSize { k: a.k }, QueryKind::KmeansSum { k: a.k }] {
        check_exact(&closed_form_sensitivity(&k, &p)?, a.require_exact)?;
    }
    let data = load_data(&a.data, p.domain())?;
    let cfg = KmeansConfig {
        iterations: a.iterations,
        size_share: a.size_share,
        ..KmeansConfig::new(a.k)
    };
    let pp = PrivacyParams::new(a.noise.epsilon, a.noise.seed)?;
    let result = kmeans_private(&data.to_vectors(), &cfg, &p, &pp)?;

    let dims = p.domain().num_attributes();
    let names: Vec<String> = p.domain().attributes().iter().map(|x| x.name().to_string()).collect();
    let mut columns = vec!["cluster"];
    columns.extend(names.iter().map(String::as_str));
    let mut art = start(&a, "kmeans", &columns)?;
    art.meta("mechanism", "private-kmeans")?;
    art.meta("policy", p.summary())?;
    art.meta("epsilon", a.noise.epsilon)?;
    art.meta("seed", a.noise.seed)?;
    art.meta("objective", result.objective)?;
    art.extra.insert("trace".into(), serde_json::to_value(&result.trace)?);
    art.extra.insert("scales".into(), serde_json::to_value(&result.scales)?);
    art.extra.insert("ledger".into(), serde_json::to_value(&result.ledger)?);
    for (c, centroid) in result.centroids.iter().enumerate() {
        let mut row = vec![json!(c)];
        row.extend(centroid.iter().take(dims).map(|v| json!(v)));
        art.rows.push(row);
    }
    emit(&art.render(a.output.format.unwrap_or(Format::Json))?, a.output.out.as_deref())
}

fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let report = run_experiment(&read(&a.config)?)?;
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv()?,
        Format::Json => {
            let mut v = serde_json::to_value(&report)?;
            v["flags"] = serde_json::to_value(&a)?;
            serde_json::to_string_pretty(&v)? + "\n"
        }
    };
    emit(&text, a.output.out.as_deref())
}

fn budget_total(a: BudgetArgs) -> Result<(), CliError> {
    let mut ledger = BudgetLedger::from_json(&read(&a.ledger)?)?;
    if let Some(p) = load_policy(&a.policy)? {
        ledger.certify_all(&p)?;
    }
    let total = compose_budgets(&ledger)?;
    let mut art = start(&a, "budget total", &["label", "epsilon", "group"])?;
    art.meta("total", total)?;
    for c in &ledger.charges {
        art.rows.push(vec![json!(c.label), json!(c.epsilon), json!(c.group)]);
    }
    emit_text_or(format!("{total}"), art, &a.output)
}
