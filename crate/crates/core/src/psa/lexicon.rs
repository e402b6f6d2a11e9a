use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PsaError;
use crate::group::IdentityGroup;
use crate::text::words;

/// A minority identity token. `anchor` picks the counterpart among the
/// axis's anchors (so `women` can pair with `men`); without it the axis's
/// first anchor is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub token: String,
    pub group: IdentityGroup,
    pub axis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

/// What a lexicon token is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenRole<'a> {
    Minority(&'a LexiconEntry),
    Anchor { axis: &'a str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLexicon {
    entries: Vec<LexiconEntry>,
    anchors: BTreeMap<String, Vec<String>>,
}

fn check_token(token: &str) -> Result<(), PsaError> {
    if token.to_lowercase() != token {
        return Err(PsaError::NotLowercase(token.into()));
    }
    let mut w = words(token);
    match (w.next(), w.next()) {
        (Some(span), None) if span.word == token => Ok(()),
        _ => Err(PsaError::NotAWord(token.into())),
    }
}

impl TokenLexicon {
    pub fn new(entries: Vec<LexiconEntry>, anchors: BTreeMap<String, Vec<String>>) -> Result<Self, PsaError> {
        if entries.is_empty() {
            return Err(PsaError::EmptyLexicon);
        }
        let mut seen = BTreeSet::new();
        let all_tokens = entries.iter().map(|e| &e.token).chain(anchors.values().flatten());
        for token in all_tokens {
            check_token(token)?;
            if !seen.insert(token.as_str()) {
                return Err(PsaError::DuplicateToken(token.clone()));
            }
        }
        for e in &entries {
            let axis_anchors = anchors
                .get(&e.axis)
                .filter(|a| !a.is_empty())
                .ok_or_else(|| PsaError::AxisWithoutAnchor(e.axis.clone()))?;
            if let Some(anchor) = &e.anchor {
                if !axis_anchors.contains(anchor) {
                    return Err(PsaError::UndeclaredAnchor {
                        token: e.token.clone(),
                        anchor: anchor.clone(),
                        axis: e.axis.clone(),
                    });
                }
            }
        }
        Ok(TokenLexicon { entries, anchors })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn anchors(&self) -> &BTreeMap<String, Vec<String>> {
        &self.anchors
    }

    /// Distinct groups in first-appearance order.
    pub fn groups(&self) -> impl Iterator<Item = &IdentityGroup> {
        let mut seen = BTreeSet::new();
        self.entries.iter().map(|e| &e.group).filter(move |g| seen.insert(*g))
    }

    pub fn tokens_of<'a>(&'a self, group: &'a IdentityGroup) -> impl Iterator<Item = &'a LexiconEntry> + 'a {
        self.entries.iter().filter(move |e| &e.group == group)
    }

    /// The anchor token an entry is paired with.
    pub fn counterpart<'a>(&'a self, entry: &'a LexiconEntry) -> &'a str {
        entry
            .anchor
            .as_deref()
            .unwrap_or_else(|| self.anchors[&entry.axis][0].as_str())
    }

    pub fn role(&self, lowercase_word: &str) -> Option<TokenRole<'_>> {
        if let Some(e) = self.entries.iter().find(|e| e.token == lowercase_word) {
            return Some(TokenRole::Minority(e));
        }
        self.anchors
            .iter()
            .find(|(_, toks)| toks.iter().any(|t| t == lowercase_word))
            .map(|(axis, _)| TokenRole::Anchor { axis })
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::small_lexicon;
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn entry(token: &str, axis: &str) -> LexiconEntry {
        LexiconEntry { token: token.to_string(), group: "Women".into(), axis: axis.to_string(), anchor: None }
    }

    fn anchors(axis: &str, toks: &[&str]) -> BTreeMap<String, Vec<String>> {
        [(axis.to_string(), toks.iter().map(|t| t.to_string()).collect())].into_iter().collect()
    }

    #[test]
    fn roles_and_counterparts() {
        let lex = small_lexicon();
        let Some(TokenRole::Minority(e)) = lex.role("women") else { panic!() };
        assert_eq!(lex.counterpart(e), "men");
        let Some(TokenRole::Minority(e)) = lex.role("black") else { panic!() };
        assert_eq!(lex.counterpart(e), "white");
        assert_eq!(lex.role("caucasian"), Some(TokenRole::Anchor { axis: "race" }));
        assert_eq!(lex.role("table"), None);
        assert_eq!(lex.groups().count(), 6);
    }

    #[test]
    fn validation() {
        assert_eq!(
            TokenLexicon::new(vec![entry("women", "gender")], BTreeMap::new()),
            Err(PsaError::AxisWithoutAnchor("gender".into()))
        );
        assert_eq!(
            TokenLexicon::new(vec![entry("women", "gender"), entry("women", "gender")], anchors("gender", &["men"])),
            Err(PsaError::DuplicateToken("women".into()))
        );
        assert_eq!(
            TokenLexicon::new(vec![entry("Women", "gender")], anchors("gender", &["men"])),
            Err(PsaError::NotLowercase("Women".into()))
        );
        assert_eq!(
            TokenLexicon::new(vec![entry("men", "gender")], anchors("gender", &["men"])),
            Err(PsaError::DuplicateToken("men".into()))
        );
        assert_eq!(
            TokenLexicon::new(vec![entry("african american", "race")], anchors("race", &["white"])),
            Err(PsaError::NotAWord("african american".into()))
        );
        let mut e = entry("women", "gender");
        e.anchor = Some("boys".into());
        assert!(matches!(
            TokenLexicon::new(vec![e], anchors("gender", &["men"])),
            Err(PsaError::UndeclaredAnchor { .. })
        ));
    }
}
