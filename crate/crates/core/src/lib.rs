//! Privacy-attack experiment toolkit for binary-featured classifiers:
//! bit-packed datasets, a from-scratch MLP, k-means labeling, mRMR
//! feature ranking, membership/attribute inference games, and
//! distance-stratified analyses — all deterministic under a master
//! seed, data-parallel by default with a sequential fallback behind
//! the `parallel` feature.

pub mod analysis;
pub mod attacks;
pub mod bits;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod kmeans;
pub mod mlp;
pub mod mrmr;
pub mod pipeline;
pub mod seeding;
pub mod synth;

pub use bits::{BitVector, PartialVector};
pub use config::ExperimentConfig;
pub use dataset::{Dataset, Schema};
pub use error::{Error, Result};
pub use mlp::MlpModel;
pub use pipeline::{AnalyzeKind, AttackKind, Pipeline};
