//! Counterfactual offline evaluation of ranked lists from logged clickthrough data.
//!
//! Given a logged dataset produced by an "observation" ranker π and a new
//! "measurement" ranker μ to be evaluated, this crate estimates the value a
//! list metric (number of clicks, reciprocal rank) *would* have taken on μ's
//! rankings, using only π's logs. Selection bias is corrected with inverse
//! propensity weighting, where the (document, rank) propensities come either
//! from empirical frequencies or from a parametric route: an imitation ranker
//! is fitted to reproduce the logged orderings, a score-uncertainty σ is
//! inferred by maximum likelihood, and per-impression rank distributions are
//! computed with a pairwise-contest recursion and Sinkhorn normalization.
//!
//! The crate is organised around that pipeline:
//!
//! - [`model`] — shared domain types (impressions, clicks, logged datasets)
//!   plus dataset validation and rank correlation.
//! - [`data`] — LETOR-format ingestion, a synthetic pool generator with known
//!   ground truth, splitting, and the bootstrapped observation-query multiset.
//! - [`rankers`] — regularized linear pairwise rankers standing in for the
//!   observation/measurement rankers, and ranker-difference diagnostics.
//! - [`clicks`] — position-bias/noise click simulation and RandPair swaps.
//! - [`imitation`] — the imitation scorer (small MLPs) trained with pairwise
//!   or list-likelihood objectives, with exact gradients.
//! - [`rankdist`] — contest probabilities, σ inference, rank-distribution
//!   recursion, and doubly stochastic normalization.
//! - [`estimators`] — the naive, list-IPW, and item+position-IPW estimators
//!   with optional weight truncation and variance diagnostics.
//! - [`harness`] — config-driven experiment orchestration (the `rankeval`
//!   binary) with seeded multi-run averaging and CSV/JSON outputs.

pub mod clicks;
pub mod data;
pub mod estimators;
pub mod harness;
pub mod imitation;
pub mod model;
pub mod rankdist;
pub mod rankers;
