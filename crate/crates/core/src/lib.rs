//! Feature reselection for binary classifiers.
//!
//! Given a tabular dataset and a baseline feature set chosen for a primary
//! metric (AUC), this crate searches for alternate feature subsets that
//! improve a secondary model characteristic (demographic parity or
//! decision-boundary robustness) without retraining a model per candidate
//! during the search. The trick: train one model on all features, compute
//! additive per-feature attributions, group correlated features by community
//! detection on the thresholded correlation graph, and approximate the
//! outcome of a model trained without a group by subtracting the group's
//! attributions. Groups are ranked by that anticipated secondary score, the
//! ranking drives constrained removal/inclusion walks over a grid of subset
//! sizes, and only the surviving candidates get retrained and measured for
//! real.
//!
//! Module map:
//! - [`tabular`]: CSV ingestion, preprocessing, label-stratified splits, and
//!   the [`tabular::SensitiveVault`] quarantine for protected attributes.
//! - [`grouping`]: Pearson correlation graph and Louvain partitioning.
//! - [`model`]: deterministic logistic-regression trainer plus rank-based AUC.
//! - [`attribution`]: closed-form linear attributions, a brute-force Shapley
//!   oracle, and anticipated outcomes under feature removal.
//! - [`reselect`]: secondary scoring, group ranking, constrained subset
//!   generation, candidate evaluation, Pareto frontier, and the
//!   approximation benchmark.
//! - [`synth`]: synthetic dataset generator with planted correlated groups
//!   and an optional sensitive-proxy group.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiations.

pub mod attribution;
pub mod error;
pub mod grouping;
pub mod model;
pub mod reselect;
pub mod scalar;
pub mod seeds;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the main pipeline types.
pub type FeatureTable64 = tabular::FeatureTable<f64>;
pub type ShapMatrix64 = attribution::ShapMatrix<f64>;
pub type LinearScorer64 = model::LinearScorer<f64>;
pub type TrainConfig64 = model::TrainConfig<f64>;
pub type CandidateResult64 = reselect::CandidateResult<f64>;

/// `f32` instantiations for callers that prefer the narrow type.
pub type FeatureTable32 = tabular::FeatureTable<f32>;
pub type ShapMatrix32 = attribution::ShapMatrix<f32>;
pub type LinearScorer32 = model::LinearScorer<f32>;
pub type TrainConfig32 = model::TrainConfig<f32>;
pub type CandidateResult32 = reselect::CandidateResult<f32>;
