//! Domains, datasets and histograms.
//!
//! A domain is the cross product of categorical attributes. Every point has a
//! flat rank in `[0, size)` given by mixed-radix encoding with the last
//! attribute varying fastest; that rank is also the total order used by
//! cumulative histograms over multi-attribute domains.

use std::collections::{HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One attribute as written in a domain file.
///
/// Either `values` lists the labels in order, or `size` asks for the labels
/// `"0"`, `"1"`, ... `size - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ordinal: bool,
}

impl AttributeSpec {
    pub fn new<S: Into<String>>(name: S, values: &[&str]) -> Self {
        Self {
            name: name.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
            size: None,
            ordinal: false,
        }
    }

    /// Ordinal attribute with labels `"0"..size`.
    pub fn ordinal<S: Into<String>>(name: S, size: usize) -> Self {
        Self {
            name: name.into(),
            values: Vec::new(),
            size: Some(size),
            ordinal: true,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DomainFile {
    List(Vec<AttributeSpec>),
    Object { attributes: Vec<AttributeSpec> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    name: String,
    values: Vec<String>,
    ordinal: bool,
    index: HashMap<String, usize>,
}

impl Attribute {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn is_ordinal(&self) -> bool {
        self.ordinal
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// The domain `A_1 x ... x A_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    attributes: Vec<Attribute>,
    strides: Vec<usize>,
    size: usize,
}

impl DomainSpec {
    pub fn new(specs: Vec<AttributeSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidDomain("at least one attribute is required".into()));
        }
        let mut names = HashSet::new();
        let mut attributes = Vec::with_capacity(specs.len());
        for spec in specs {
            if !names.insert(spec.name.clone()) {
                return Err(Error::InvalidDomain(format!("duplicate attribute name `{}`", spec.name)));
            }
            let values = match (spec.values.is_empty(), spec.size) {
                (false, None) => spec.values,
                (false, Some(size)) if size == spec.values.len() => spec.values,
                (false, Some(size)) => {
                    return Err(Error::InvalidDomain(format!(
                        "attribute `{}` lists {} values but declares size {size}",
                        spec.name,
                        spec.values.len()
                    )))
                }
                (true, Some(size)) => (0..size).map(|v| v.to_string()).collect(),
                (true, None) => Vec::new(),
            };
            if values.is_empty() {
                return Err(Error::InvalidDomain(format!("attribute `{}` has no values", spec.name)));
            }
            let mut index = HashMap::with_capacity(values.len());
            for (i, label) in values.iter().enumerate() {
                if index.insert(label.clone(), i).is_some() {
                    return Err(Error::InvalidDomain(format!(
                        "attribute `{}` repeats the label `{label}`",
                        spec.name
                    )));
                }
            }
            attributes.push(Attribute {
                name: spec.name,
                values,
                ordinal: spec.ordinal,
                index,
            });
        }

        let mut strides = vec![0; attributes.len()];
        let mut size: usize = 1;
        for (i, attr) in attributes.iter().enumerate().rev() {
            strides[i] = size;
            size = size
                .checked_mul(attr.cardinality())
                .ok_or_else(|| Error::InvalidDomain("domain size overflows".into()))?;
        }
        Ok(Self {
            attributes,
            strides,
            size,
        })
    }

    /// A single ordinal attribute with `size` positions.
    pub fn line(name: &str, size: usize) -> Result<Self> {
        Self::new(vec![AttributeSpec::ordinal(name, size)])
    }

    /// Integer grid `[0, m)^dims`, attributes named `x0`, `x1`, ...
    pub fn grid(dims: usize, m: usize) -> Result<Self> {
        Self::new((0..dims).map(|d| AttributeSpec::ordinal(format!("x{d}"), m)).collect())
    }

    /// Parses a domain file: either a bare list of attributes or
    /// `{"attributes": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: DomainFile = serde_json::from_str(text)?;
        let specs = match file {
            DomainFile::List(specs) => specs,
            DomainFile::Object { attributes } => attributes,
        };
        Self::new(specs)
    }

    pub fn to_specs(&self) -> Vec<AttributeSpec> {
        self.attributes
            .iter()
            .map(|a| AttributeSpec {
                name: a.name.clone(),
                values: a.values.clone(),
                size: None,
                ordinal: a.ordinal,
            })
            .collect()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.attributes.iter().map(Attribute::cardinality).collect()
    }

    /// `|T|`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, point: &Point) -> bool {
        point.0.len() == self.attributes.len()
            && point
                .0
                .iter()
                .zip(&self.attributes)
                .all(|(&v, a)| v < a.cardinality())
    }

    fn check(&self, point: &Point) -> Result<()> {
        if self.contains(point) {
            Ok(())
        } else {
            Err(Error::PointMismatch(format!("{:?}", point.0)))
        }
    }

    pub fn rank(&self, point: &Point) -> Result<usize> {
        self.check(point)?;
        Ok(point.0.iter().zip(&self.strides).map(|(v, s)| v * s).sum())
    }

    pub fn unrank(&self, rank: usize) -> Result<Point> {
        if rank >= self.size {
            return Err(Error::PointMismatch(format!("rank {rank} >= domain size {}", self.size)));
        }
        Ok(Point(self.coords(rank)))
    }

    /// Attribute indices of the point with the given rank. The rank must be
    /// in range.
    pub fn coords(&self, rank: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.attributes)
            .map(|(s, a)| (rank / s) % a.cardinality())
            .collect()
    }

    /// Index of attribute `attr` in the point with the given rank.
    pub fn coord(&self, rank: usize, attr: usize) -> usize {
        (rank / self.strides[attr]) % self.attributes[attr].cardinality()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// L1 distance between two points measured in index units.
    pub fn l1_distance(&self, x: &Point, y: &Point) -> Result<u64> {
        self.check(x)?;
        self.check(y)?;
        Ok(x.0.iter().zip(&y.0).map(|(a, b)| a.abs_diff(*b) as u64).sum())
    }

    pub fn l1_between_ranks(&self, x: usize, y: usize) -> u64 {
        (0..self.attributes.len())
            .map(|a| self.coord(x, a).abs_diff(self.coord(y, a)) as u64)
            .sum()
    }

    /// Largest L1 distance between two points, `d(T)`.
    pub fn diameter(&self) -> u64 {
        self.attributes.iter().map(|a| (a.cardinality() - 1) as u64).sum()
    }

    pub fn parse_point(&self, labels: &[&str]) -> Result<Point> {
        if labels.len() != self.attributes.len() {
            return Err(Error::PointMismatch(format!(
                "expected {} labels, got {}",
                self.attributes.len(),
                labels.len()
            )));
        }
        let indices = labels
            .iter()
            .zip(&self.attributes)
            .map(|(label, attr)| {
                attr.index_of(label).ok_or_else(|| {
                    Error::PointMismatch(format!("`{label}` is not a value of `{}`", attr.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Point(indices))
    }
}

/// A domain value as per-attribute indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point(pub Vec<usize>);

impl Point {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Row {
    pub id: u64,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Dataset {
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(rows: Vec<Row>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if !seen.insert(row.id) {
                return Err(Error::InvalidDataset(format!("duplicate id {}", row.id)));
            }
        }
        Ok(Self { rows })
    }

    /// Rows with ids `0..n` in order.
    pub fn from_points(points: Vec<Point>) -> Self {
        Self {
            rows: points
                .into_iter()
                .enumerate()
                .map(|(i, point)| Row { id: i as u64, point })
                .collect(),
        }
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Points as real vectors of attribute indices.
    pub fn to_vectors(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.point.0.iter().map(|&v| v as f64).collect())
            .collect()
    }
}

/// Reads delimited text with a header row. Columns are matched to domain
/// attributes by name; an optional `id` column supplies tuple ids, otherwise
/// ids are `0..n` in file order.
pub fn ingest_dataset<R: Read>(reader: R, domain: &DomainSpec) -> Result<Dataset> {
    ingest_with_delimiter(reader, domain, b',')
}

pub fn ingest_with_delimiter<R: Read>(reader: R, domain: &DomainSpec, delimiter: u8) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    let mut id_col = None;
    let mut attr_cols = vec![None; domain.num_attributes()];
    for (col, name) in header.iter().enumerate() {
        if name == "id" {
            id_col = Some(col);
        } else if let Some(a) = domain.attribute_index(name) {
            if attr_cols[a].replace(col).is_some() {
                return Err(Error::InvalidDataset(format!("column `{name}` appears twice")));
            }
        } else {
            return Err(Error::InvalidDataset(format!("column `{name}` is not a domain attribute")));
        }
    }
    let attr_cols = attr_cols
        .into_iter()
        .enumerate()
        .map(|(a, c)| {
            c.ok_or_else(|| {
                Error::InvalidDataset(format!("missing column `{}`", domain.attributes()[a].name()))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidDataset(format!("row {}: {e}", line + 1)))?;
        if record.len() != header.len() {
            return Err(Error::InvalidDataset(format!(
                "row {} has {} columns, header has {}",
                line + 1,
                record.len(),
                header.len()
            )));
        }
        let labels: Vec<&str> = attr_cols.iter().map(|&c| &record[c]).collect();
        let point = domain
            .parse_point(&labels)
            .map_err(|e| Error::InvalidDataset(format!("row {}: {e}", line + 1)))?;
        let id = match id_col {
            Some(c) => record[c]
                .parse::<u64>()
                .map_err(|e| Error::InvalidDataset(format!("row {}: bad id: {e}", line + 1)))?,
            None => line as u64,
        };
        rows.push(Row { id, point });
    }
    Dataset::new(rows)
}

/// Counts per domain value, indexed by rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn from_dataset(domain: &DomainSpec, data: &Dataset) -> Result<Self> {
        let mut counts = vec![0u64; domain.size()];
        for row in data.rows() {
            counts[domain.rank(&row.point)?] += 1;
        }
        Ok(Self { counts })
    }

    pub fn from_ranks(size: usize, ranks: &[usize]) -> Self {
        let mut counts = vec![0u64; size];
        for &r in ranks {
            counts[r] += 1;
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn cumulative(&self) -> CumulativeHistogram {
        CumulativeHistogram::from_histogram(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulativeHistogram {
    prefix: Vec<u64>,
}

impl CumulativeHistogram {
    pub fn from_histogram(h: &Histogram) -> Self {
        let prefix = h
            .counts
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        Self { prefix }
    }

    pub fn prefix(&self) -> &[u64] {
        &self.prefix
    }

    /// Number of distinct prefix values `p`.
    pub fn distinct_count(&self) -> usize {
        let mut p = 0;
        let mut last = None;
        for &v in &self.prefix {
            if last != Some(v) {
                p += 1;
                last = Some(v);
            }
        }
        p
    }

    /// Count in the 1-based inclusive range `[i, j]`.
    pub fn range(&self, i: usize, j: usize) -> u64 {
        let upper = self.prefix[j - 1];
        let lower = if i > 1 { self.prefix[i - 2] } else { 0 };
        upper - lower
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.prefix.iter().map(|&c| c as f64).collect()
    }
}
