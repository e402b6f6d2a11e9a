use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{check_lengths, roc_auc, t_confidence_interval, MetricError};
use crate::group::IdentityGroup;
use crate::seed::stream_rng;

pub const DEFAULT_RESAMPLES: usize = 100;

/// Pinned ROC AUC of one subgroup, averaged over background resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedAucResult {
    pub group: IdentityGroup,
    pub value: f64,
    pub n_subgroup: usize,
    pub n_background_per_resample: usize,
    /// Resamples requested. Resamples that drew a single class are dropped,
    /// so `per_resample_values` may be shorter.
    pub n_resamples: usize,
    pub per_resample_values: Vec<f64>,
    pub seed: u64,
    pub ci_95: Option<(f64, f64)>,
}

/// Indices of the pinned set for resample `resample`: the whole subgroup
/// followed by `|subgroup|` background items drawn without replacement.
pub fn pinned_resample_indices(
    group_mask: &[bool],
    seed: u64,
    resample: u64,
) -> Result<Vec<usize>, MetricError> {
    let subgroup: Vec<usize> = (0..group_mask.len()).filter(|&i| group_mask[i]).collect();
    let background: Vec<usize> = (0..group_mask.len()).filter(|&i| !group_mask[i]).collect();
    if subgroup.is_empty() {
        return Err(MetricError::SubgroupEmpty);
    }
    if background.len() < subgroup.len() {
        return Err(MetricError::BackgroundTooSmall {
            needed: subgroup.len(),
            available: background.len(),
        });
    }
    let mut rng = stream_rng(seed, resample);
    let mut pinned = subgroup.clone();
    pinned.extend(index::sample(&mut rng, background.len(), subgroup.len()).into_iter().map(|k| background[k]));
    Ok(pinned)
}

/// Pinned ROC AUC: the subgroup pooled with an equal-sized background draw,
/// repeated `n_resamples` times. Resample `r` uses stream `r` of `seed`, so
/// the result does not depend on evaluation order.
pub fn pinned_auc(
    group: IdentityGroup,
    scores: &[f64],
    labels: &[bool],
    group_mask: &[bool],
    seed: u64,
    n_resamples: usize,
) -> Result<PinnedAucResult, MetricError> {
    check_lengths(scores.len(), labels.len())?;
    check_lengths(scores.len(), group_mask.len())?;
    if n_resamples == 0 {
        return Err(MetricError::InsufficientData(0));
    }
    let n_subgroup = group_mask.iter().filter(|&&m| m).count();

    let mut values = Vec::with_capacity(n_resamples);
    let mut pinned_scores = Vec::with_capacity(2 * n_subgroup);
    let mut pinned_labels = Vec::with_capacity(2 * n_subgroup);
    for r in 0..n_resamples {
        let idx = pinned_resample_indices(group_mask, seed, r as u64)?;
        pinned_scores.clear();
        pinned_labels.clear();
        pinned_scores.extend(idx.iter().map(|&i| scores[i]));
        pinned_labels.extend(idx.iter().map(|&i| labels[i]));
        match roc_auc(&pinned_scores, &pinned_labels) {
            Ok(v) => values.push(v),
            Err(MetricError::DegenerateLabels { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(MetricError::DegenerateResamples);
    }
    let value = super::mean(&values);
    let ci_95 = t_confidence_interval(&values, 0.95).ok();
    Ok(PinnedAucResult {
        group,
        value,
        n_subgroup,
        n_background_per_resample: n_subgroup,
        n_resamples,
        per_resample_values: values,
        seed,
        ci_95,
    })
}
