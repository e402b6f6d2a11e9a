use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{PsaError, TokenLexicon, TokenRole};
use crate::corpus::Corpus;
use crate::group::IdentityGroup;
use crate::text::{words, CasePattern};

/// Identity slot marker in templates.
pub const SLOT: &str = "[IDENT]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub template: String,
    pub toxic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOrigin {
    Template,
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualPair {
    pub pair_id: String,
    pub origin: PairOrigin,
    pub group: IdentityGroup,
    pub axis: String,
    pub anchor_token: String,
    pub minority_token: String,
    pub anchor_text: String,
    pub minority_text: String,
    pub toxic: bool,
}

/// One pair per (template, minority token), in template order then lexicon
/// order. The anchor side fills the slot with the token's counterpart.
pub fn generate_template_pairs(
    templates: &[Template],
    lexicon: &TokenLexicon,
) -> Result<Vec<CounterfactualPair>, PsaError> {
    let mut pairs = Vec::with_capacity(templates.len() * lexicon.entries().len());
    for (index, t) in templates.iter().enumerate() {
        let slots = t.template.matches(SLOT).count();
        if slots != 1 {
            return Err(PsaError::MalformedTemplate { index, slots });
        }
        for entry in lexicon.entries() {
            let anchor = lexicon.counterpart(entry);
            pairs.push(CounterfactualPair {
                pair_id: format!("t{index}:{}", entry.token),
                origin: PairOrigin::Template,
                group: entry.group.clone(),
                axis: entry.axis.clone(),
                anchor_token: anchor.into(),
                minority_token: entry.token.clone(),
                anchor_text: t.template.replacen(SLOT, anchor, 1),
                minority_text: t.template.replacen(SLOT, &entry.token, 1),
                toxic: t.toxic,
            });
        }
    }
    Ok(pairs)
}

/// Replaces every whole-word, case-insensitive occurrence of `from` with
/// `to`, carrying over each site's capitalization (lower, Title, UPPER).
pub fn substitute(text: &str, from: &str, to: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for w in words(text) {
        if w.word.to_lowercase() == from {
            out.push_str(&text[last..w.start]);
            out.push_str(&CasePattern::of(w.word).apply(to));
            last = w.end;
        }
    }
    out.push_str(&text[last..]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    /// No lexicon token at all.
    NoIdentityToken,
    /// More than one distinct lexicon token.
    MultiToken,
    /// An anchor token no minority entry pairs with.
    AnchorWithoutCounterpart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSkip {
    pub sample_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPairs {
    pub pairs: Vec<CounterfactualPair>,
    pub skips: Vec<PairSkip>,
}

/// Pairs from real sentences. A sentence qualifies only if exactly one
/// distinct lexicon token occurs in it (any number of times). A minority
/// token yields one pair against its counterpart; an anchor token yields
/// one pair per minority entry whose counterpart it is.
pub fn derive_corpus_pairs(corpus: &Corpus, lexicon: &TokenLexicon) -> CorpusPairs {
    let mut result = CorpusPairs::default();
    for sample in corpus.samples() {
        let found: BTreeSet<String> = words(&sample.text)
            .map(|w| w.word.to_lowercase())
            .filter(|w| lexicon.role(w).is_some())
            .collect();
        let skip = |reason| PairSkip { sample_id: sample.id.clone(), reason };
        let token = match found.len() {
            0 => {
                result.skips.push(skip(SkipReason::NoIdentityToken));
                continue;
            }
            1 => found.into_iter().next().expect("one token"),
            _ => {
                result.skips.push(skip(SkipReason::MultiToken));
                continue;
            }
        };
        let make = |entry: &super::LexiconEntry, anchor_text: String, minority_text: String| CounterfactualPair {
            pair_id: format!("{}:{}", sample.id, entry.token),
            origin: PairOrigin::Corpus,
            group: entry.group.clone(),
            axis: entry.axis.clone(),
            anchor_token: lexicon.counterpart(entry).into(),
            minority_token: entry.token.clone(),
            anchor_text,
            minority_text,
            toxic: sample.toxic,
        };
        match lexicon.role(&token).expect("token came from the lexicon") {
            TokenRole::Minority(entry) => {
                let anchor_text = substitute(&sample.text, &entry.token, lexicon.counterpart(entry));
                result.pairs.push(make(entry, anchor_text, sample.text.clone()));
            }
            TokenRole::Anchor { .. } => {
                let before = result.pairs.len();
                for entry in lexicon.entries().iter().filter(|e| lexicon.counterpart(e) == token) {
                    let minority_text = substitute(&sample.text, &token, &entry.token);
                    result.pairs.push(make(entry, sample.text.clone(), minority_text));
                }
                if result.pairs.len() == before {
                    result.skips.push(skip(SkipReason::AnchorWithoutCounterpart));
                }
            }
        }
    }
    result
}
