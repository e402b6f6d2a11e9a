use serde::{Deserialize, Serialize};

use super::{check_lengths, MetricError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Flag-based operating-point metrics. `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion_metrics(flags: &[bool], labels: &[bool]) -> Result<ConfusionMetrics, MetricError> {
    check_lengths(flags.len(), labels.len())?;
    if flags.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut c = ConfusionCounts::default();
    for (&flag, &label) in flags.iter().zip(labels) {
        match (flag, label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(ConfusionMetrics {
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.fn_ + c.tp),
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        counts: c,
    })
}
