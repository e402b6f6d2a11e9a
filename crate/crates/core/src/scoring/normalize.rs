use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

/// Flag threshold applied when a provider has no native binary flag.
pub const FALLBACK_FLAG_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormalizeError {
    #[error("category mapping is empty")]
    EmptyMapping,
    #[error("response has no sub-category scores")]
    NoScores,
    #[error("mapped category `{0}` is absent from the response")]
    UnknownCategory(String),
    #[error("category `{category}` has score {value} outside [0, 1]")]
    OutOfRange { category: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub hate_score: f64,
    pub flagged: bool,
}

/// Collapses sub-category scores to one hate score: the maximum over the
/// mapped categories. The provider's own flag wins when present.
pub fn normalize_sub_scores(
    sub_scores: &BTreeMap<String, f64>,
    mapping: &BTreeSet<String>,
    native_flag: Option<bool>,
) -> Result<Normalized, NormalizeError> {
    if mapping.is_empty() {
        return Err(NormalizeError::EmptyMapping);
    }
    if sub_scores.is_empty() {
        return Err(NormalizeError::NoScores);
    }
    for (category, &value) in sub_scores {
        if !(0.0..=1.0).contains(&value) {
            return Err(NormalizeError::OutOfRange { category: category.clone(), value });
        }
    }
    let mut hate_score = 0.0_f64;
    for category in mapping {
        let v = sub_scores
            .get(category)
            .ok_or_else(|| NormalizeError::UnknownCategory(category.clone()))?;
        hate_score = hate_score.max(*v);
    }
    Ok(Normalized {
        hate_score,
        flagged: native_flag.unwrap_or(hate_score >= FALLBACK_FLAG_THRESHOLD),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn mapping(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn zero_scores() {
        let n = normalize_sub_scores(&scores(&[("hate", 0.0), ("violence", 0.0)]), &mapping(&["hate"]), None).unwrap();
        assert_eq!(n, Normalized { hate_score: 0.0, flagged: false });
    }

    #[test]
    fn max_over_mapped_categories() {
        let s = scores(&[("hate", 0.2), ("harassment", 0.6)]);
        let n = normalize_sub_scores(&s, &mapping(&["hate", "harassment"]), None).unwrap();
        assert_eq!(n.hate_score, 0.6);
        assert!(n.flagged);
        let s = scores(&[("hate", 0.7), ("sexual", 0.9)]);
        assert_eq!(normalize_sub_scores(&s, &mapping(&["hate"]), None).unwrap().hate_score, 0.7);
    }

    #[test]
    fn native_flag_wins() {
        let s = scores(&[("hate", 0.9)]);
        assert!(!normalize_sub_scores(&s, &mapping(&["hate"]), Some(false)).unwrap().flagged);
    }

    #[test]
    fn missing_mapped_category_is_an_error() {
        let s = scores(&[("violence", 0.3)]);
        assert_eq!(
            normalize_sub_scores(&s, &mapping(&["hate"]), None),
            Err(NormalizeError::UnknownCategory("hate".into()))
        );
        assert_eq!(
            normalize_sub_scores(&scores(&[("hate", 1.5)]), &mapping(&["hate"]), None),
            Err(NormalizeError::OutOfRange { category: "hate".into(), value: 1.5 })
        );
    }

    proptest::proptest! {
        #[test]
        fn hate_score_is_exact_mapped_max(
            values in proptest::collection::vec(0.0f64..=1.0, 1..12),
            picks in proptest::collection::vec(proptest::bool::ANY, 12),
        ) {
            let s: BTreeMap<String, f64> =
                values.iter().enumerate().map(|(i, v)| (alloc::format!("c{i}"), *v)).collect();
            let mut m: BTreeSet<String> =
                (0..values.len()).filter(|&i| picks[i]).map(|i| alloc::format!("c{i}")).collect();
            if m.is_empty() {
                m.insert("c0".into());
            }
            let expected = m.iter().map(|c| s[c]).fold(f64::NEG_INFINITY, f64::max);
            let got = normalize_sub_scores(&s, &m, None).unwrap();
            proptest::prop_assert_eq!(got.hate_score, expected);
        }
    }
}
