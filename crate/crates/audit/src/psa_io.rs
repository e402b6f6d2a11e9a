//! Lexicon and template files (JSONL), plus the bundled defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use modaudit_core::psa::{LexiconEntry, PsaError, Template, TokenLexicon};
use serde::Deserialize;

/// The bundled 34-token lexicon.
pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.jsonl");
/// Twenty neutral identity-phrase templates.
pub const DEFAULT_TEMPLATES: &str = include_str!("../data/neutral_templates.jsonl");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsaFileError {
    pub source_name: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for PsaFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.source_name, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for PsaFileError {}

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum LexiconLine {
    Entry(LexiconEntry),
    Anchors { axis: String, anchors: Vec<String> },
    Note {
        #[allow(dead_code)]
        note: String,
    },
}

fn jsonl_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses a lexicon: entry lines `{token, group, axis, anchor?}`, anchor
/// declarations `{axis, anchors}` and free-form `{note}` lines.
pub fn parse_lexicon(content: &str, source_name: &str) -> Result<TokenLexicon, PsaFileError> {
    let err = |line, message: String| PsaFileError { source_name: source_name.to_string(), line, message };
    let mut entries = Vec::new();
    let mut anchors: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (n, line) in jsonl_lines(content) {
        let parsed: LexiconLine = serde_json::from_str(line)
            .map_err(|e| err(Some(n), format!("not an entry, anchor declaration or note: {e}")))?;
        match parsed {
            LexiconLine::Entry(e) => entries.push(e),
            LexiconLine::Anchors { axis, anchors: toks } => anchors.entry(axis).or_default().extend(toks),
            LexiconLine::Note { .. } => {}
        }
    }
    TokenLexicon::new(entries, anchors).map_err(|e: PsaError| err(None, e.to_string()))
}

pub fn parse_templates(content: &str, source_name: &str) -> Result<Vec<Template>, PsaFileError> {
    jsonl_lines(content)
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| PsaFileError {
                source_name: source_name.to_string(),
                line: Some(n),
                message: e.to_string(),
            })
        })
        .collect()
}

fn read(path: &Path) -> Result<String, PsaFileError> {
    std::fs::read_to_string(path).map_err(|e| PsaFileError {
        source_name: path.display().to_string(),
        line: None,
        message: e.to_string(),
    })
}

/// Loads the lexicon at `path`, or the bundled one.
pub fn load_lexicon(path: Option<&PathBuf>) -> Result<TokenLexicon, PsaFileError> {
    match path {
        Some(p) => parse_lexicon(&read(p)?, &p.display().to_string()),
        None => parse_lexicon(DEFAULT_LEXICON, "<bundled lexicon>"),
    }
}

/// Loads templates from `path`, or the bundled neutral set.
pub fn load_templates(path: Option<&PathBuf>) -> Result<Vec<Template>, PsaFileError> {
    match path {
        Some(p) => parse_templates(&read(p)?, &p.display().to_string()),
        None => parse_templates(DEFAULT_TEMPLATES, "<bundled templates>"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use modaudit_core::psa::generate_template_pairs;
    use modaudit_core::GroupRegistry;

    #[test]
    fn bundled_lexicon_covers_default_groups() {
        let lex = load_lexicon(None).unwrap();
        assert_eq!(lex.entries().len(), 34);
        let registry = GroupRegistry::default();
        let groups: Vec<_> = lex.groups().collect();
        assert_eq!(groups.len(), 7);
        assert!(groups.iter().all(|g| registry.contains(g)));
        assert_eq!(lex.anchors()["race"], vec!["white", "caucasian"]);
    }

    #[test]
    fn bundled_templates_give_680_pairs() {
        let lex = load_lexicon(None).unwrap();
        let templates = load_templates(None).unwrap();
        assert_eq!(templates.len(), 20);
        assert!(templates.iter().all(|t| !t.toxic));
        let pairs = generate_template_pairs(&templates, &lex).unwrap();
        assert_eq!(pairs.len(), 680);
    }

    #[test]
    fn bad_lines_are_located() {
        let e = parse_lexicon("{\"note\":\"x\"}\n{\"token\":1}\n", "lex").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_lexicon("{\"token\":\"gay\",\"group\":\"LGBTQ+\",\"axis\":\"o\"}\n", "lex").unwrap_err();
        assert!(e.message.contains("no anchor"), "{e}");
        let e = parse_templates("{\"template\":\"[IDENT] x\",\"toxic\":false}\n\n{\"template\":3}\n", "t").unwrap_err();
        assert_eq!(e.line, Some(3));
    }
}
