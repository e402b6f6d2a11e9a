//! Normalized scorer output and the deterministic local scorers.

mod lexicon;
mod normalize;

pub use lexicon::{make_planted_bias_scorer, squash, LexiconError, LexiconScorer, DEFAULT_FLAG_THRESHOLD};
pub use normalize::{normalize_sub_scores, NormalizeError, Normalized, FALLBACK_FLAG_THRESHOLD};

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

pub const UNKNOWN_MODEL_VERSION: &str = "unknown";

/// One scorer verdict for one text, collapsed to a single hate score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerationScore {
    pub text_id: String,
    pub provider_id: String,
    pub model_version: String,
    pub sub_scores: BTreeMap<String, f64>,
    pub hate_score: f64,
    pub flagged: bool,
    /// RFC 3339 UTC.
    pub retrieved_at: String,
    pub from_cache: bool,
}
