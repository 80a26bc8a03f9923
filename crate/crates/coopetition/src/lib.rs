//! Quantifying internal co-opetition from binary affiliation data.
//!
//! The pipeline: load an entities x features incidence matrix, compute
//! pairwise Hamming distances, take reciprocal similarities, keep the top
//! tail above an empirical-percentile cutoff, build a weighted graph,
//! detect communities by modularity maximization, then score each
//! community's competitive stance (mean grade) and cooperative stance
//! (conductance) and lay the graph out for visualization.

pub mod affiliation;
pub mod community;
pub mod error;
pub mod graph;
pub mod layout;
pub mod metrics;
pub mod pipeline;
pub mod similarity;
pub mod synthgen;

pub use error::{Error, Result};
