//! Blowfish privacy: policies built from secret graphs and count constraints,
//! policy-specific sensitivity, and the mechanisms that release histograms,
//! cumulative histograms, range queries and k-means centroids under them.

pub mod domain;
pub mod error;
pub mod eval;
pub mod kmeans;
pub mod mechanisms;
pub mod policy;
pub mod sensitivity;

pub use error::{Error, Result};
