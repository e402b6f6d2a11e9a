use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CounterfactualPair, PsaError};
use crate::group::IdentityGroup;
use crate::metrics::{mean, t_confidence_interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CftRecord {
    pub pair_id: String,
    pub provider_id: String,
    pub score_anchor: f64,
    pub score_minority: f64,
    /// `score_minority - score_anchor`.
    pub cft: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToxicSlice {
    NonToxic,
    Toxic,
}

impl ToxicSlice {
    pub fn of(toxic: bool) -> Self {
        if toxic {
            ToxicSlice::Toxic
        } else {
            ToxicSlice::NonToxic
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToxicSlice::NonToxic => "non-toxic",
            ToxicSlice::Toxic => "toxic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CftGroupSummary {
    pub group: IdentityGroup,
    pub toxic_slice: ToxicSlice,
    pub n_pairs: usize,
    pub mean_cft: f64,
    /// `None` when the cell has fewer than two pairs.
    pub ci_95: Option<(f64, f64)>,
}

/// Records plus `(pair_id, error)` for pairs that could not be scored.
pub type CftOutcome<E> = (Vec<CftRecord>, Vec<(String, E)>);

/// Scores both sides of every pair with `score` and records the difference.
/// A pair whose either side fails produces no record; the first failure is
/// returned in the error list instead. Records keep pair order.
pub fn compute_cft<E, F>(
    pairs: &[CounterfactualPair],
    provider_id: &str,
    mut score: F,
) -> Result<CftOutcome<E>, PsaError>
where
    F: FnMut(&str) -> Result<f64, E>,
{
    if pairs.is_empty() {
        return Err(PsaError::NoPairs);
    }
    let mut records = Vec::with_capacity(pairs.len());
    let mut errors = Vec::new();
    for p in pairs {
        let both = score(&p.anchor_text).and_then(|a| score(&p.minority_text).map(|m| (a, m)));
        match both {
            Ok((score_anchor, score_minority)) => records.push(CftRecord {
                pair_id: p.pair_id.clone(),
                provider_id: provider_id.into(),
                score_anchor,
                score_minority,
                cft: score_minority - score_anchor,
            }),
            Err(e) => errors.push((p.pair_id.clone(), e)),
        }
    }
    Ok((records, errors))
}

/// Mean CFT and t-interval per (group, toxicity slice). Rows are ordered by
/// group in first-appearance order of `pairs`, non-toxic before toxic.
pub fn summarize_cft(records: &[CftRecord], pairs: &[CounterfactualPair], level: f64) -> Vec<CftGroupSummary> {
    let by_id: BTreeMap<&str, &CounterfactualPair> = pairs.iter().map(|p| (p.pair_id.as_str(), p)).collect();
    let mut group_order: Vec<&IdentityGroup> = Vec::new();
    for p in pairs {
        if !group_order.contains(&&p.group) {
            group_order.push(&p.group);
        }
    }
    let mut cells: BTreeMap<(usize, ToxicSlice), Vec<f64>> = BTreeMap::new();
    for r in records {
        let Some(pair) = by_id.get(r.pair_id.as_str()) else { continue };
        let g = group_order.iter().position(|g| **g == pair.group).expect("group of a known pair");
        cells.entry((g, ToxicSlice::of(pair.toxic))).or_default().push(r.cft);
    }
    cells
        .into_iter()
        .map(|((g, toxic_slice), values)| CftGroupSummary {
            group: group_order[g].clone(),
            toxic_slice,
            n_pairs: values.len(),
            mean_cft: mean(&values),
            ci_95: t_confidence_interval(&values, level).ok(),
        })
        .collect()
}
