//! Graph-based automatic feature selection (GB-AFS).
//!
//! Every feature is described by how well it separates each pair of classes
//! (Jeffries–Matusita distances), those descriptions are embedded with exact
//! t-SNE, and the embedded features are clustered with k-medoids for every
//! candidate subset size `k`. The mean simplified silhouette (MSS) of each
//! clustering, averaged over cross-validation folds, traces a curve whose
//! knee gives the smallest subset size `k_min`; the medoids of the final
//! clustering are the selected features.
//!
//! The crate also carries the comparison filters (ReliefF, Fisher score,
//! CFS, random), a KNN evaluation harness, report serialization, and SVG
//! plotting used by the `gbafs` command-line tool.

pub mod baselines;
pub mod classify;
pub mod dataio;
mod error;
pub mod kmedoids;
pub mod knee;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod rng;
pub mod separability;
pub mod synthetic;
pub mod tsne;
pub mod validity;

pub use dataio::{Dataset, SplitSpec};
pub use error::{Error, Result};
pub use pipeline::{PipelineConfig, SelectionResult};
