//! Core primitives for black-box fairness audits of moderation scorers.
//!
//! Everything in this crate is pure and allocation-only: rank-based ROC AUC,
//! confusion-matrix rates, pinned subgroup AUC, Student-t intervals, score
//! normalization, the deterministic lexicon and planted-bias scorers,
//! corpus balancing and stratified budget sampling, and counterfactual pair
//! construction for perturbation sensitivity analysis. IO, transports,
//! caching and reporting live in the `modaudit` crate.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod group;
pub mod metrics;
pub mod psa;
pub mod scoring;
pub mod seed;
pub mod text;

pub use group::{GroupRegistry, IdentityGroup};
