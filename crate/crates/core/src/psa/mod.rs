//! Perturbation sensitivity analysis: counterfactual pairs built by swapping
//! identity tokens for anchor (majority) tokens, and Counterfactual Token
//! Fairness statistics over their score differences.
//!
//! Sign convention throughout: `cft = score_minority - score_anchor`, so a
//! positive value means the minority version was scored more toxic.

mod cft;
mod lexicon;
mod pairs;

pub use cft::{compute_cft, CftOutcome, summarize_cft, CftGroupSummary, CftRecord, ToxicSlice};
pub use lexicon::{LexiconEntry, TokenLexicon, TokenRole};
pub use pairs::{
    derive_corpus_pairs, generate_template_pairs, substitute, CorpusPairs, CounterfactualPair, PairOrigin,
    PairSkip, SkipReason, Template, SLOT,
};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PsaError {
    #[error("lexicon token `{0}` is listed more than once")]
    DuplicateToken(String),
    #[error("lexicon token `{0}` is not lowercase")]
    NotLowercase(String),
    #[error("lexicon token `{0}` is not a single word")]
    NotAWord(String),
    #[error("axis `{0}` has no anchor tokens")]
    AxisWithoutAnchor(String),
    #[error("token `{token}` names anchor `{anchor}`, which is not declared for axis `{axis}`")]
    UndeclaredAnchor { token: String, anchor: String, axis: String },
    #[error("lexicon has no entries")]
    EmptyLexicon,
    #[error("template {index} has {slots} identity slots, expected exactly one")]
    MalformedTemplate { index: usize, slots: usize },
    #[error("no pairs to score")]
    NoPairs,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    /// Gender, orientation, race and religion axes, a few tokens each.
    pub(crate) fn small_lexicon() -> TokenLexicon {
        let e = |token: &str, group: &str, axis: &str, anchor: Option<&str>| LexiconEntry {
            token: token.to_string(),
            group: group.into(),
            axis: axis.to_string(),
            anchor: anchor.map(ToString::to_string),
        };
        TokenLexicon::new(
            vec![
                e("woman", "Women", "gender", Some("man")),
                e("women", "Women", "gender", Some("men")),
                e("gay", "LGBTQ+", "sexual_orientation", None),
                e("lesbian", "LGBTQ+", "sexual_orientation", None),
                e("black", "PoC", "race", None),
                e("asian", "Asian", "race", None),
                e("muslim", "Muslim", "religion", None),
                e("jewish", "Jewish", "religion", None),
            ],
            [
                ("gender", vec!["man", "men"]),
                ("sexual_orientation", vec!["straight"]),
                ("race", vec!["white", "caucasian"]),
                ("religion", vec!["christian"]),
            ]
            .into_iter()
            .map(|(a, t)| (a.to_string(), t.into_iter().map(ToString::to_string).collect()))
            .collect(),
        )
        .unwrap()
    }
}
