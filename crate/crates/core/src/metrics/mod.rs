//! Threshold-invariant and threshold-variant performance metrics.

mod auc;
mod confusion;
mod pinned;
mod tdist;

pub use auc::roc_auc;
pub use confusion::{confusion_metrics, ConfusionCounts, ConfusionMetrics};
pub use pinned::{pinned_auc, pinned_resample_indices, PinnedAucResult, DEFAULT_RESAMPLES};
pub use tdist::{mean, sample_std, student_t_cdf, student_t_quantile, t_confidence_interval};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("input lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("labels contain a single class ({positives} positive, {negatives} negative)")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("subgroup is empty")]
    SubgroupEmpty,
    #[error("background has {available} items, pinned sample needs {needed}")]
    BackgroundTooSmall { needed: usize, available: usize },
    #[error("every resample had a single class")]
    DegenerateResamples,
    #[error("at least two values are needed, got {0}")]
    InsufficientData(usize),
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
}

pub(crate) fn check_lengths(left: usize, right: usize) -> Result<(), MetricError> {
    if left != right {
        return Err(MetricError::LengthMismatch { left, right });
    }
    Ok(())
}
