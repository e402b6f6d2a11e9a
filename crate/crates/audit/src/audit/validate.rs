//! Self-validation against a scorer with known, planted bias.

use std::sync::Arc;

use modaudit_core::metrics::{pinned_auc, roc_auc};
use modaudit_core::psa::{compute_cft, generate_template_pairs, summarize_cft};
use modaudit_core::scoring::LexiconScorer;
use modaudit_core::seed::{derive_seed, stream_rng};
use modaudit_core::corpus::TextSample;
use modaudit_core::IdentityGroup;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::AuditConfig;
use crate::format::fmt6;
use crate::providers::{batch_score, Provider, ProviderError, ProviderKind, ProviderSpec, SystemClock};
use crate::psa_io::{load_lexicon, load_templates};

pub const CFT_TOLERANCE: f64 = 1e-9;
pub const MIN_PINNED_DROP: f64 = 0.05;
pub const MAX_CONTROL_GAP: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error("invalid validation setup: {0}")]
    Config(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub expected: String,
    pub measured: f64,
    pub passed: bool,
}

impl std::fmt::Display for Assertion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: expected {}, measured {}", self.name, self.expected, fmt6(self.measured))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_pairs: usize,
    pub assertions: Vec<Assertion>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Synthetic scored corpus: `n` samples alternating toxic and non-toxic,
/// the first `n_group` of them in the group. Negatives score around 0.3 and
/// positives around 0.7; with `degrade`, the group's positives score like
/// negatives. Returns (scores, labels, group mask).
pub fn synthetic_scored_corpus(n: usize, n_group: usize, degrade: bool, seed: u64) -> (Vec<f64>, Vec<bool>, Vec<bool>) {
    let mut rng = stream_rng(seed, 0);
    let negative: Normal<f64> = Normal::new(0.3, 0.1).expect("valid normal");
    let positive: Normal<f64> = Normal::new(0.7, 0.1).expect("valid normal");
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    for i in 0..n {
        let toxic = i % 2 == 0;
        let in_group = i < n_group;
        let dist = if toxic && !(degrade && in_group) { &positive } else { &negative };
        scores.push(dist.sample(&mut rng).clamp(0.0, 1.0));
        labels.push(toxic);
        mask.push(in_group);
    }
    (scores, labels, mask)
}

fn pinned_gap(group: &IdentityGroup, degrade: bool, seed: u64, n_resamples: usize) -> f64 {
    let (scores, labels, mask) = synthetic_scored_corpus(2000, 200, degrade, seed);
    let overall = roc_auc(&scores, &labels).expect("both classes present");
    let pinned = pinned_auc(group.clone(), &scores, &labels, &mask, seed, n_resamples).expect("group and background present");
    overall - pinned.value
}

/// Runs template pairs through the planted-bias scorer built from
/// `config.validation` and checks that each group's mean CFT equals its
/// delta, then checks pinned-AUC sensitivity on synthetic scores.
pub fn validate_planted_bias(config: &AuditConfig) -> Result<ValidationReport, ValidationError> {
    let registry = config.validate_common().map_err(|e| ValidationError::Config(e.to_string()))?;
    let v = &config.validation;
    let psa = config.psa.clone().unwrap_or_default();
    let lexicon = load_lexicon(psa.lexicon.as_ref().map(|p| config.resolve(p)).as_ref())
        .map_err(|e| ValidationError::Config(e.to_string()))?;
    let templates = load_templates(psa.templates.as_ref().map(|p| config.resolve(p)).as_ref())
        .map_err(|e| ValidationError::Config(e.to_string()))?;
    let pairs = generate_template_pairs(&templates, &lexicon).map_err(|e| ValidationError::Config(e.to_string()))?;
    if pairs.is_empty() {
        return Err(ValidationError::Config("no template pairs".into()));
    }

    let base = LexiconScorer::new(v.term_weights.clone(), 0.5).map_err(|e| ValidationError::Config(e.to_string()))?;
    for p in &pairs {
        let delta = v.deltas.get(&p.group).copied().unwrap_or(0.0);
        let planted = base.base_score(&p.minority_text) + delta;
        if !(0.0..=1.0).contains(&planted) {
            return Err(ValidationError::Config(format!(
                "delta {delta} for `{}` leaves [0, 1] on \"{}\" (base {})",
                p.group,
                p.minority_text,
                base.base_score(&p.minority_text)
            )));
        }
    }

    let mut spec = ProviderSpec::lexicon("planted-bias", v.term_weights.clone());
    spec.kind = ProviderKind::PlantedBias;
    spec.deltas = v.deltas.clone();
    let provider = Provider::build(spec, &lexicon, &|_| None, Arc::new(SystemClock::new()))
        .map_err(|e| ValidationError::Config(e.to_string()))?;

    let mut texts: Vec<&str> = Vec::new();
    for p in &pairs {
        for t in [p.anchor_text.as_str(), p.minority_text.as_str()] {
            if !texts.contains(&t) {
                texts.push(t);
            }
        }
    }
    let samples: Vec<TextSample> =
        texts.iter().enumerate().map(|(k, t)| TextSample::new(format!("t{k}"), *t, false, "templates")).collect();
    let outcome = batch_score(&provider, &samples, None, &|_| {})?;
    let scores: std::collections::HashMap<&str, f64> = texts
        .iter()
        .zip(&outcome.results)
        .filter_map(|(t, r)| r.as_ref().ok().map(|s| (*t, s.hate_score)))
        .collect();
    let (records, failed) = compute_cft(&pairs, provider.id(), |t| scores.get(t).copied().ok_or(()))
        .map_err(|e| ValidationError::Config(e.to_string()))?;
    if !failed.is_empty() {
        return Err(ValidationError::Config(format!("{} pairs could not be scored", failed.len())));
    }

    let mut assertions = Vec::new();
    for row in summarize_cft(&records, &pairs, psa.level) {
        let expected = v.deltas.get(&row.group).copied().unwrap_or(0.0);
        assertions.push(Assertion {
            name: format!("mean cft {} {}", row.group, row.toxic_slice.as_str()),
            expected: format!("{} within {CFT_TOLERANCE:e}", fmt6(expected)),
            measured: row.mean_cft,
            passed: (row.mean_cft - expected).abs() <= CFT_TOLERANCE,
        });
    }

    for g in registry.iter().filter(|g| v.deltas.get(*g).is_some_and(|d| *d != 0.0)) {
        let gap = pinned_gap(g, true, derive_seed(config.seed, &format!("synthetic:{g}")), v.n_resamples);
        assertions.push(Assertion {
            name: format!("pinned auc drop {g}"),
            expected: format!(">= {MIN_PINNED_DROP}"),
            measured: gap,
            passed: gap >= MIN_PINNED_DROP,
        });
    }
    let control = IdentityGroup::new("control");
    let gap = pinned_gap(&control, false, derive_seed(config.seed, "synthetic:control"), v.n_resamples);
    assertions.push(Assertion {
        name: "pinned auc gap without planted bias".into(),
        expected: format!("|gap| <= {MAX_CONTROL_GAP}"),
        measured: gap,
        passed: gap.abs() <= MAX_CONTROL_GAP,
    });

    Ok(ValidationReport { n_pairs: pairs.len(), assertions })
}
