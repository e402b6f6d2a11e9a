//! Black-box fairness audits of content-moderation scoring services.
//!
//! This crate carries everything with IO in it: provider transports with
//! rate limiting, retries and an append-only response cache; corpus,
//! lexicon and template file formats; the audit pipeline and its reports;
//! and the `modaudit` command-line driver. The numeric and text primitives
//! come from [`modaudit_core`].

pub mod audit;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod format;
pub mod providers;
pub mod psa_io;

pub use modaudit_core as core;
