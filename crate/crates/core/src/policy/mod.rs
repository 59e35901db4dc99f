//! Blowfish policies: a domain, a discriminative secret graph and a set of
//! count-query constraints.

mod graph;
mod neighbors;
mod parallel;

pub use graph::{EdgeOracle, SecretGraph};
pub use neighbors::{enumerate_neighbors, DatabaseSpace, NeighborPair, SecretPair, DEFAULT_BUDGET};
pub use parallel::{check_parallel_decomposition, critical_pairs};

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::domain::{AttributeSpec, DomainSpec, Point};
use crate::error::{Error, Result};

/// A count query `q_phi`: for each attribute an optional set of allowed value
/// indices. Attributes without a set are unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CountQuery {
    allowed: Vec<Option<Vec<usize>>>,
    answer: Option<u64>,
}

impl CountQuery {
    pub fn new(domain: &DomainSpec, allowed: Vec<Option<Vec<usize>>>, answer: Option<u64>) -> Result<Self> {
        if allowed.len() != domain.num_attributes() {
            return Err(Error::InvalidQuery(format!(
                "predicate covers {} attributes, domain has {}",
                allowed.len(),
                domain.num_attributes()
            )));
        }
        let mut normalized = Vec::with_capacity(allowed.len());
        for (set, attr) in allowed.into_iter().zip(domain.attributes()) {
            let Some(mut set) = set else {
                normalized.push(None);
                continue;
            };
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::InvalidQuery(format!("empty value set for `{}`", attr.name())));
            }
            if let Some(&v) = set.iter().find(|&&v| v >= attr.cardinality()) {
                return Err(Error::InvalidQuery(format!("value index {v} out of range for `{}`", attr.name())));
            }
            if set.len() == attr.cardinality() {
                normalized.push(None);
            } else {
                normalized.push(Some(set));
            }
        }
        Ok(Self {
            allowed: normalized,
            answer,
        })
    }

    /// Query that counts every tuple.
    pub fn cardinality(domain: &DomainSpec, answer: Option<u64>) -> Self {
        Self {
            allowed: vec![None; domain.num_attributes()],
            answer,
        }
    }

    /// Marginal cell: each attribute in `attrs` fixed to the matching value.
    pub fn cell(domain: &DomainSpec, attrs: &[usize], values: &[usize], answer: Option<u64>) -> Result<Self> {
        let mut allowed = vec![None; domain.num_attributes()];
        for (&a, &v) in attrs.iter().zip(values) {
            if a >= domain.num_attributes() {
                return Err(Error::InvalidQuery(format!("attribute index {a} out of range")));
            }
            allowed[a] = Some(vec![v]);
        }
        Self::new(domain, allowed, answer)
    }

    /// Axis-aligned rectangle with inclusive index bounds per attribute.
    pub fn rectangle(domain: &DomainSpec, bounds: &[(usize, usize)], answer: Option<u64>) -> Result<Self> {
        let allowed = bounds
            .iter()
            .map(|&(lo, hi)| {
                if lo > hi {
                    Err(Error::InvalidQuery(format!("empty range [{lo}, {hi}]")))
                } else {
                    Ok(Some((lo..=hi).collect()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, allowed, answer)
    }

    pub fn allowed(&self) -> &[Option<Vec<usize>>] {
        &self.allowed
    }

    pub fn answer(&self) -> Option<u64> {
        self.answer
    }

    pub fn with_answer(mut self, answer: Option<u64>) -> Self {
        self.answer = answer;
        self
    }

    /// `phi(x)` for a point given by attribute indices.
    pub fn matches(&self, coords: &[usize]) -> bool {
        self.allowed
            .iter()
            .zip(coords)
            .all(|(set, v)| set.as_ref().is_none_or(|s| s.binary_search(v).is_ok()))
    }

    pub fn matches_point(&self, point: &Point) -> bool {
        self.matches(point.indices())
    }

    pub fn is_always_true(&self) -> bool {
        self.allowed.iter().all(Option::is_none)
    }

    /// Attributes with a restricted value set.
    pub fn constrained_attributes(&self) -> Vec<usize> {
        self.allowed
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|_| i))
            .collect()
    }

    /// Inclusive index bounds per attribute when every set is contiguous.
    pub fn as_rectangle(&self, domain: &DomainSpec) -> Option<Vec<(usize, usize)>> {
        self.allowed
            .iter()
            .zip(domain.attributes())
            .map(|(set, attr)| match set {
                None => Some((0, attr.cardinality() - 1)),
                Some(s) => {
                    let (lo, hi) = (s[0], s[s.len() - 1]);
                    (hi - lo + 1 == s.len()).then_some((lo, hi))
                }
            })
            .collect()
    }

    /// True when the query selects exactly one domain point.
    pub fn is_point_query(&self, domain: &DomainSpec) -> bool {
        self.allowed
            .iter()
            .zip(domain.attributes())
            .all(|(set, attr)| match set {
                None => attr.cardinality() == 1,
                Some(s) => s.len() == 1,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    None,
    CardinalityOnly,
    General,
}

/// The deterministic constraints `Q`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ConstraintSet {
    queries: Vec<CountQuery>,
}

impl ConstraintSet {
    pub fn new(queries: Vec<CountQuery>) -> Self {
        Self { queries }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn queries(&self) -> &[CountQuery] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn kind(&self) -> ConstraintKind {
        if self.queries.is_empty() {
            ConstraintKind::None
        } else if self.queries.iter().all(CountQuery::is_always_true) {
            ConstraintKind::CardinalityOnly
        } else {
            ConstraintKind::General
        }
    }

    /// `table[q][rank]` is `phi_q` evaluated at the point with that rank.
    pub fn membership(&self, domain: &DomainSpec) -> Vec<Vec<bool>> {
        let coords: Vec<Vec<usize>> = (0..domain.size()).map(|r| domain.coords(r)).collect();
        self.queries
            .iter()
            .map(|q| coords.iter().map(|c| q.matches(c)).collect())
            .collect()
    }

    /// Marginal over `attrs`: one cell query per value combination, the last
    /// attribute varying fastest. `answers`, when given, follow the same order.
    pub fn marginal(domain: &DomainSpec, attrs: &[usize], answers: Option<&[u64]>) -> Result<Self> {
        let cards: Vec<usize> = attrs
            .iter()
            .map(|&a| {
                domain
                    .attributes()
                    .get(a)
                    .map(|x| x.cardinality())
                    .ok_or_else(|| Error::InvalidQuery(format!("attribute index {a} out of range")))
            })
            .collect::<Result<_>>()?;
        let cells: usize = cards.iter().product();
        if let Some(ans) = answers {
            if ans.len() != cells {
                return Err(Error::InvalidQuery(format!(
                    "marginal has {cells} cells but {} answers were given",
                    ans.len()
                )));
            }
        }
        let mut queries = Vec::with_capacity(cells);
        for cell in 0..cells {
            let mut rest = cell;
            let mut values = vec![0; attrs.len()];
            for i in (0..attrs.len()).rev() {
                values[i] = rest % cards[i];
                rest /= cards[i];
            }
            queries.push(CountQuery::cell(domain, attrs, &values, answers.map(|a| a[cell]))?);
        }
        Ok(Self { queries })
    }

    pub fn extend(&mut self, other: ConstraintSet) {
        self.queries.extend(other.queries);
    }
}

/// The policy triple `(T, G, I_Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    domain: DomainSpec,
    graph: SecretGraph,
    constraints: ConstraintSet,
}

impl Policy {
    pub fn new(domain: DomainSpec, graph: SecretGraph, constraints: ConstraintSet) -> Result<Self> {
        graph.validate(&domain)?;
        for q in constraints.queries() {
            if q.allowed().len() != domain.num_attributes() {
                return Err(Error::InvalidPolicy("constraint does not match the domain".into()));
            }
        }
        Ok(Self {
            domain,
            graph,
            constraints,
        })
    }

    pub fn unconstrained(domain: DomainSpec, graph: SecretGraph) -> Result<Self> {
        Self::new(domain, graph, ConstraintSet::empty())
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn graph(&self) -> &SecretGraph {
        &self.graph
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    /// Parses a policy file. The domain comes from the file's `domain` field
    /// when present, otherwise from `domain`.
    pub fn from_json(text: &str, domain: Option<&DomainSpec>) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidPolicy("policy must be a JSON object".into()))?;

        let domain = match (obj.get("domain"), domain) {
            (Some(d), _) => {
                let specs: Vec<AttributeSpec> = match d {
                    Value::Object(o) if o.contains_key("attributes") => {
                        serde_json::from_value(o["attributes"].clone())?
                    }
                    other => serde_json::from_value(other.clone())?,
                };
                DomainSpec::new(specs)?
            }
            (None, Some(d)) => d.clone(),
            (None, None) => return Err(Error::InvalidPolicy("no domain given".into())),
        };

        let graph = match obj.get("graph") {
            Some(g) => SecretGraph::from_json_value(g, &domain)?,
            None => return Err(Error::InvalidPolicy("missing `graph`".into())),
        };

        let mut constraints = ConstraintSet::empty();
        if let Some(list) = obj.get("constraints") {
            let list = list
                .as_array()
                .ok_or_else(|| Error::InvalidPolicy("`constraints` must be a list".into()))?;
            for entry in list {
                constraints.extend(parse_constraint(entry, &domain)?);
            }
        }
        Self::new(domain, graph, constraints)
    }

    /// Short human-readable description used in release metadata.
    pub fn summary(&self) -> String {
        format!(
            "{} graph, {} constraint(s) ({:?}), |T| = {}",
            self.graph.kind_name(),
            self.constraints.len(),
            self.constraints.kind(),
            self.domain.size()
        )
    }
}

fn parse_constraint(entry: &Value, domain: &DomainSpec) -> Result<ConstraintSet> {
    let obj = entry
        .as_object()
        .ok_or_else(|| Error::InvalidPolicy("each constraint must be an object".into()))?;

    if let Some(attrs) = obj.get("marginal") {
        let names: Vec<String> = serde_json::from_value(attrs.clone())?;
        let idx = names
            .iter()
            .map(|n| attribute_index(domain, n))
            .collect::<Result<Vec<_>>>()?;
        let answers: Option<Vec<u64>> = obj.get("answers").map(|a| serde_json::from_value(a.clone())).transpose()?;
        return ConstraintSet::marginal(domain, &idx, answers.as_deref());
    }

    let answer = obj
        .get("answer")
        .map(|a| {
            a.as_u64()
                .ok_or_else(|| Error::InvalidPolicy("`answer` must be a non-negative integer".into()))
        })
        .transpose()?;
    let fields = match obj.get("where") {
        Some(Value::Object(w)) => w.clone(),
        Some(_) => return Err(Error::InvalidPolicy("`where` must be an object".into())),
        None => obj.iter().filter(|(k, _)| k.as_str() != "answer").map(|(k, v)| (k.clone(), v.clone())).collect(),
    };

    let mut allowed = vec![None; domain.num_attributes()];
    for (name, spec) in &fields {
        let a = attribute_index(domain, name)?;
        let attr = &domain.attributes()[a];
        let set = match spec {
            Value::Object(o) if o.contains_key("range") => {
                let [lo, hi]: [usize; 2] = serde_json::from_value(o["range"].clone())?;
                index_range(lo, hi, name)?
            }
            Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_u64) => {
                let bounds: Vec<usize> = serde_json::from_value(spec.clone())?;
                if bounds.len() != 2 {
                    return Err(Error::InvalidPolicy(format!(
                        "`{name}`: numeric form must be [lo, hi]"
                    )));
                }
                index_range(bounds[0], bounds[1], name)?
            }
            Value::Array(items) => items
                .iter()
                .map(|v| {
                    let label = v
                        .as_str()
                        .ok_or_else(|| Error::InvalidPolicy(format!("`{name}`: labels must be strings")))?;
                    attr.index_of(label)
                        .ok_or_else(|| Error::InvalidPolicy(format!("`{label}` is not a value of `{name}`")))
                })
                .collect::<Result<Vec<_>>>()?,
            Value::String(label) => vec![attr
                .index_of(label)
                .ok_or_else(|| Error::InvalidPolicy(format!("`{label}` is not a value of `{name}`")))?],
            _ => return Err(Error::InvalidPolicy(format!("`{name}`: unsupported value set"))),
        };
        allowed[a] = Some(set);
    }
    Ok(ConstraintSet::new(vec![CountQuery::new(domain, allowed, answer)?]))
}

fn index_range(lo: usize, hi: usize, name: &str) -> Result<Vec<usize>> {
    if lo > hi {
        return Err(Error::InvalidPolicy(format!("`{name}`: empty range [{lo}, {hi}]")));
    }
    Ok((lo..=hi).collect())
}

fn attribute_index(domain: &DomainSpec, name: &str) -> Result<usize> {
    domain
        .attribute_index(name)
        .ok_or_else(|| Error::InvalidPolicy(format!("unknown attribute `{name}`")))
}

/// Groups domain ranks by the set of queries they satisfy. Returns the class
/// of every rank and, per class, its satisfied-query signature.
pub(crate) fn signature_classes(table: &[Vec<bool>], size: usize) -> (Vec<usize>, Vec<Vec<bool>>) {
    let mut ids: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    let mut class_of = Vec::with_capacity(size);
    let mut signatures = Vec::new();
    for r in 0..size {
        let sig: Vec<bool> = table.iter().map(|row| row[r]).collect();
        let next = ids.len();
        let id = *ids.entry(sig.clone()).or_insert_with(|| {
            signatures.push(sig);
            next
        });
        class_of.push(id);
    }
    (class_of, signatures)
}
