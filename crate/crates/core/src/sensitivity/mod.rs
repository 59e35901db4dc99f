//! Policy-specific global sensitivity.

mod closed;
mod oracle;
mod sparse;
mod specialized;

pub use closed::closed_form_sensitivity;
pub use oracle::{brute_force_sensitivity, brute_force_with_witness};
pub use sparse::{
    alpha_xi, build_policy_graph, is_sparse, lifts_lowers, sparse_constraint_sensitivity,
    sparse_sensitivity_certified, LiftLower, PolicyGraph, MAX_POLICY_GRAPH_VERTICES,
};
pub use specialized::{recognize_shape, specialized_constraint_sensitivity, Shape};

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::policy::{ConstraintKind, Policy};

/// Queries whose sensitivity can be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryKind {
    CompleteHistogram,
    /// Histogram over the cells of a partition, `cells[rank]` being the cell.
    PartitionHistogram { cells: Vec<usize> },
    CumulativeHistogram,
    /// `sum_i w_i x_i` where the value of a tuple is its rank mapped
    /// linearly onto `[low, high]`.
    LinearSum { weights: Vec<f64>, low: f64, high: f64 },
    KmeansSize { k: usize },
    KmeansSum { k: usize },
}

impl QueryKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CompleteHistogram => "histogram",
            Self::PartitionHistogram { .. } => "partition-histogram",
            Self::CumulativeHistogram => "cumulative",
            Self::LinearSum { .. } => "linear-sum",
            Self::KmeansSize { .. } => "kmeans-size",
            Self::KmeansSum { .. } => "kmeans-sum",
        }
    }

    pub(crate) fn validate(&self, domain: &DomainSpec) -> Result<()> {
        match self {
            Self::PartitionHistogram { cells } if cells.len() != domain.size() => Err(Error::InvalidQuery(
                format!("partition covers {} values, domain has {}", cells.len(), domain.size()),
            )),
            Self::LinearSum { weights, low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    Err(Error::InvalidQuery(format!("bad value range [{low}, {high}]")))
                } else if weights.iter().any(|w| !w.is_finite()) {
                    Err(Error::InvalidQuery("weights must be finite".into()))
                } else {
                    Ok(())
                }
            }
            Self::KmeansSize { k } | Self::KmeansSum { k } if *k == 0 => {
                Err(Error::InvalidQuery("k must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Value assigned to a rank by `LinearSum`.
    pub(crate) fn linear_value(low: f64, high: f64, size: usize, rank: usize) -> f64 {
        if size <= 1 {
            low
        } else {
            low + rank as f64 * (high - low) / (size - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Exactness {
    Exact,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    ClosedForm,
    SparseEngine,
    Specialized,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityResult {
    #[serde(serialize_with = "serialize_value")]
    pub value: f64,
    pub exactness: Exactness,
    pub method: Method,
}

fn serialize_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("infinity")
    }
}

impl SensitivityResult {
    pub fn new(value: f64, exactness: Exactness, method: Method) -> Self {
        Self {
            value,
            exactness,
            method,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    /// The value, or an error when infinite.
    pub fn finite(&self) -> Result<f64> {
        if self.is_finite() {
            Ok(self.value)
        } else {
            Err(Error::InfiniteSensitivity)
        }
    }
}

impl fmt::Display for SensitivityResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.is_finite() {
            write!(f, "{}, {:?}, {:?}", self.value, self.exactness, self.method)
        } else {
            write!(f, "infinity, {:?}, {:?}", self.exactness, self.method)
        }
    }
}

/// Sensitivity of the complete histogram, choosing the method by policy:
/// closed form without constraints, the sparse engine when the constraints
/// are sparse, otherwise a recognised specialization.
pub fn histogram_sensitivity(policy: &Policy) -> Result<SensitivityResult> {
    match policy.constraints().kind() {
        ConstraintKind::None | ConstraintKind::CardinalityOnly => {
            closed_form_sensitivity(&QueryKind::CompleteHistogram, policy)
        }
        ConstraintKind::General => match sparse_constraint_sensitivity(policy) {
            Ok(r) => Ok(r),
            Err(Error::NotSparse(..)) | Err(Error::TooManyVertices(..)) => specialized_constraint_sensitivity(policy),
            Err(e) => Err(e),
        },
    }
}
