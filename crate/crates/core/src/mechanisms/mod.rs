//! Noise mechanisms and privacy-budget accounting.

mod budget;
mod isotonic;
mod laplace;
mod noise;
mod oh;
mod ordered;

pub use budget::{compose_budgets, BudgetLedger, Charge, ParallelGroup};
pub use isotonic::{isotonic_inference, isotonic_inference_nonneg};
pub use laplace::{laplace_mechanism, laplace_mechanism_with, laplace_release};
pub use noise::{sample_laplace, NoiseSource, PrivacyParams};
pub(crate) use noise::{check_epsilon, TAG_KMEANS};
pub use oh::{
    build_hierarchical_release, build_oh_release, build_oh_release_with, oh_cumulative, oh_range_query,
    optimal_budget_split, split_constants, split_error, tree_height, BudgetSplit, HierarchicalTree, NodeKind, OHTree,
    TreeNode,
};
pub use ordered::{ordered_mechanism, ordered_mechanism_with, ReleasedCumulative};

use crate::error::{Error, Result};

/// A release that answers prefix and range counts over a 1-D domain.
pub trait PrefixRelease {
    /// Estimates of `[1, j]` for `j = 1..=n`.
    fn prefixes(&self) -> &[f64];

    fn domain_size(&self) -> usize {
        self.prefixes().len()
    }

    /// Estimate of `[i, j]` (1-based, inclusive). Panics when out of range.
    fn range(&self, i: usize, j: usize) -> f64 {
        let p = self.prefixes();
        p[j - 1] - if i > 1 { p[i - 2] } else { 0.0 }
    }

    fn try_range(&self, i: usize, j: usize) -> Result<f64> {
        if i == 0 || i > j || j > self.domain_size() {
            return Err(Error::InvalidQuery(format!(
                "range [{i}, {j}] outside [1, {}]",
                self.domain_size()
            )));
        }
        Ok(self.range(i, j))
    }
}

/// Stable 64-bit hash of a key, as used to derive noise streams.
pub fn key_hash(key: &[u64]) -> u64 {
    noise::mix(key)
}
