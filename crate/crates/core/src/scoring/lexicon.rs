use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::group::IdentityGroup;
use crate::psa::TokenLexicon;
use crate::text::words;

pub const DEFAULT_FLAG_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LexiconError {
    #[error("term `{term}` has negative or non-finite weight {weight}")]
    BadWeight { term: String, weight: f64 },
    #[error("flag threshold {0} is outside (0, 1)")]
    BadThreshold(f64),
    #[error("group `{0}` has no tokens in the lexicon")]
    UnknownGroup(String),
    #[error("delta for group `{group}` is not finite: {delta}")]
    BadDelta { group: String, delta: f64 },
}

/// Bounded monotone map from summed term weight to `[0, 1)`: `w / (1 + w)`.
pub fn squash(weight: f64) -> f64 {
    weight / (1.0 + weight)
}

/// Deterministic local scorer: summed weights of matched terms, squashed,
/// plus an additive delta per identity group whose tokens appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconScorer {
    term_weights: BTreeMap<String, f64>,
    bias_deltas: BTreeMap<IdentityGroup, f64>,
    group_tokens: BTreeMap<String, IdentityGroup>,
    flag_threshold: f64,
}

impl LexiconScorer {
    pub fn new(term_weights: BTreeMap<String, f64>, flag_threshold: f64) -> Result<Self, LexiconError> {
        if !(flag_threshold > 0.0 && flag_threshold < 1.0) {
            return Err(LexiconError::BadThreshold(flag_threshold));
        }
        let mut weights = BTreeMap::new();
        for (term, weight) in term_weights {
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(LexiconError::BadWeight { term, weight });
            }
            weights.insert(term.to_lowercase(), weight);
        }
        Ok(LexiconScorer {
            term_weights: weights,
            bias_deltas: BTreeMap::new(),
            group_tokens: BTreeMap::new(),
            flag_threshold,
        })
    }

    pub fn flag_threshold(&self) -> f64 {
        self.flag_threshold
    }

    pub fn bias_deltas(&self) -> &BTreeMap<IdentityGroup, f64> {
        &self.bias_deltas
    }

    /// Score before any planted delta.
    pub fn base_score(&self, text: &str) -> f64 {
        let total: f64 = words(text)
            .filter_map(|w| self.term_weights.get(&w.word.to_lowercase()))
            .sum();
        squash(total)
    }

    pub fn score(&self, text: &str) -> f64 {
        let base = self.base_score(text);
        if self.bias_deltas.is_empty() {
            return base;
        }
        let mut present: BTreeMap<&IdentityGroup, ()> = BTreeMap::new();
        for w in words(text) {
            if let Some(g) = self.group_tokens.get(&w.word.to_lowercase()) {
                present.insert(g, ());
            }
        }
        let delta: f64 = present.keys().filter_map(|g| self.bias_deltas.get(*g)).sum();
        (base + delta).clamp(0.0, 1.0)
    }

    pub fn flagged(&self, score: f64) -> bool {
        score >= self.flag_threshold
    }
}

/// Wraps `base` with per-group additive deltas, keyed on the lexicon's
/// minority tokens (whole-word, case-insensitive).
pub fn make_planted_bias_scorer(
    base: &LexiconScorer,
    deltas: &BTreeMap<IdentityGroup, f64>,
    lexicon: &TokenLexicon,
) -> Result<LexiconScorer, LexiconError> {
    let mut scorer = base.clone();
    scorer.group_tokens = lexicon
        .entries()
        .iter()
        .map(|e| (e.token.clone(), e.group.clone()))
        .collect();
    for (group, &delta) in deltas {
        if !lexicon.groups().any(|g| g == group) {
            return Err(LexiconError::UnknownGroup(group.to_string()));
        }
        if !delta.is_finite() {
            return Err(LexiconError::BadDelta { group: group.to_string(), delta });
        }
        if delta != 0.0 {
            scorer.bias_deltas.insert(group.clone(), delta);
        }
    }
    Ok(scorer)
}
