//! Word-level text helpers shared by the scorers and pair generation.

use alloc::string::String;

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A whole word inside a text: a maximal run of alphanumeric characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordSpan<'a> {
    pub start: usize,
    pub end: usize,
    pub word: &'a str,
}

/// Iterates the whole words of `text` with their byte offsets.
pub fn words(text: &str) -> impl Iterator<Item = WordSpan<'_>> {
    let mut chars = text.char_indices().peekable();
    core::iter::from_fn(move || {
        let start = loop {
            let (i, c) = chars.next()?;
            if c.is_alphanumeric() {
                break i;
            }
        };
        let mut end = text.len();
        while let Some(&(i, c)) = chars.peek() {
            if !c.is_alphanumeric() {
                end = i;
                break;
            }
            chars.next();
        }
        Some(WordSpan { start, end, word: &text[start..end] })
    })
}

/// Capitalization pattern of a word occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasePattern {
    Lower,
    /// First character uppercase, the rest not.
    Title,
    /// Every cased character uppercase (and more than one character).
    Upper,
}

impl CasePattern {
    /// Mixed-case words that fit none of the patterns fall back to `Title`
    /// when they start uppercase and `Lower` otherwise.
    pub fn of(word: &str) -> CasePattern {
        let mut chars = word.chars();
        let Some(first) = chars.next() else {
            return CasePattern::Lower;
        };
        if !first.is_uppercase() {
            return CasePattern::Lower;
        }
        let rest: String = chars.collect();
        if !rest.is_empty() && rest.chars().all(|c| !c.is_lowercase()) {
            CasePattern::Upper
        } else {
            CasePattern::Title
        }
    }

    /// Renders a lowercase token in this pattern.
    pub fn apply(self, token: &str) -> String {
        match self {
            CasePattern::Lower => token.to_lowercase(),
            CasePattern::Upper => token.to_uppercase(),
            CasePattern::Title => {
                let mut out = String::with_capacity(token.len());
                let mut chars = token.chars();
                if let Some(c) = chars.next() {
                    out.extend(c.to_uppercase());
                }
                for c in chars {
                    out.extend(c.to_lowercase());
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn word_count_splits_on_whitespace() {
        assert_eq!(word_count("  i  hate\tyou\n"), 3);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn words_are_alphanumeric_runs() {
        let w: Vec<_> = words("Women's rights, LGBTQ-friendly!").map(|s| s.word).collect();
        assert_eq!(w, ["Women", "s", "rights", "LGBTQ", "friendly"]);
        let spans: Vec<_> = words("ab cd").map(|s| (s.start, s.end)).collect();
        assert_eq!(spans, [(0, 2), (3, 5)]);
        assert_eq!(words("...").count(), 0);
    }

    #[test]
    fn case_patterns_round_trip() {
        for (w, p) in [("women", CasePattern::Lower), ("Women", CasePattern::Title), ("WOMEN", CasePattern::Upper)] {
            assert_eq!(CasePattern::of(w), p);
            assert_eq!(p.apply("women"), w);
        }
        assert_eq!(CasePattern::of("A"), CasePattern::Title);
        assert_eq!(CasePattern::Title.apply("men"), "Men");
    }
}
