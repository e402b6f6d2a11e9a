//! Labeled text samples, identity-group mapping, class balancing and
//! stratified budget sampling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::group::{GroupRegistry, IdentityGroup, RegistryError};
use crate::seed::stream_rng;
use crate::text::word_count;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("sample `{0}` has empty text")]
    EmptyText(String),
    #[error("sample `{id}` carries label `{label}` which no mapping rule covers")]
    UnmappedLabel { id: String, label: String },
    #[error("corpus has a single class ({toxic} toxic, {non_toxic} non-toxic)")]
    SingleClass { toxic: usize, non_toxic: usize },
    #[error("budget {budget} is smaller than the {strata} non-empty strata")]
    BudgetTooSmall { budget: usize, strata: usize },
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub text: String,
    pub toxic: bool,
    /// Canonical groups; filled by [`map_groups`].
    pub groups: BTreeSet<IdentityGroup>,
    /// Target labels as they appear in the source dataset.
    pub raw_labels: Vec<String>,
    pub source: String,
    pub word_count: usize,
}

impl TextSample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, toxic: bool, source: impl Into<String>) -> Self {
        let text = text.into();
        TextSample {
            id: id.into(),
            word_count: word_count(&text),
            text,
            toxic,
            groups: BTreeSet::new(),
            raw_labels: Vec::new(),
            source: source.into(),
        }
    }

    pub fn with_raw_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.raw_labels = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn in_group(&self, group: &IdentityGroup) -> bool {
        self.groups.contains(group)
    }
}

/// An immutable, id-unique collection of samples.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    samples: Vec<TextSample>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, samples: Vec<TextSample>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for s in &samples {
            if s.text.is_empty() {
                return Err(CorpusError::EmptyText(s.id.clone()));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
        }
        Ok(Corpus { name: name.into(), samples })
    }

    pub fn samples(&self) -> &[TextSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// (toxic, non-toxic) counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let toxic = self.samples.iter().filter(|s| s.toxic).count();
        (toxic, self.samples.len() - toxic)
    }

    pub fn mean_word_count(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let total: usize = self.samples.iter().map(|s| s.word_count).sum();
        Some(total as f64 / self.samples.len() as f64)
    }

    fn retain_indices(&self, mut keep: Vec<usize>) -> Corpus {
        keep.sort_unstable();
        Corpus {
            name: self.name.clone(),
            samples: keep.into_iter().map(|i| self.samples[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnmappedPolicy {
    #[default]
    DropGroup,
    Error,
}

/// Raw dataset label → canonical group. Rule keys match case-insensitively
/// after trimming; a raw label spelled exactly like a registry name maps to
/// that group without a rule.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupMapping {
    pub rules: BTreeMap<String, IdentityGroup>,
    #[serde(default)]
    pub unmapped_policy: UnmappedPolicy,
}

impl GroupMapping {
    pub fn validate(&self, registry: &GroupRegistry) -> Result<(), CorpusError> {
        for target in self.rules.values() {
            if !registry.contains(target) {
                return Err(RegistryError::UnknownGroup(target.to_string()).into());
            }
        }
        Ok(())
    }

    fn lookup(&self, label: &str, registry: &GroupRegistry) -> Option<IdentityGroup> {
        let key = label.trim().to_lowercase();
        self.rules
            .iter()
            .find(|(k, _)| k.trim().to_lowercase() == key)
            .map(|(_, g)| g.clone())
            .or_else(|| registry.get(label.trim()).cloned())
    }
}

/// Replaces every sample's groups with the canonical groups of its raw labels.
pub fn map_groups(corpus: &Corpus, mapping: &GroupMapping, registry: &GroupRegistry) -> Result<Corpus, CorpusError> {
    mapping.validate(registry)?;
    let mut samples = Vec::with_capacity(corpus.len());
    for s in corpus.samples() {
        let mut groups = BTreeSet::new();
        for label in &s.raw_labels {
            match mapping.lookup(label, registry) {
                Some(g) => {
                    groups.insert(g);
                }
                None if mapping.unmapped_policy == UnmappedPolicy::Error => {
                    return Err(CorpusError::UnmappedLabel { id: s.id.clone(), label: label.clone() });
                }
                None => {}
            }
        }
        samples.push(TextSample { groups, ..s.clone() });
    }
    Ok(Corpus { name: corpus.name.clone(), samples })
}

/// Downsamples the majority class to the minority-class size. Retained
/// samples keep their relative order.
pub fn balance(corpus: &Corpus, seed: u64) -> Result<Corpus, CorpusError> {
    let (toxic, non_toxic) = corpus.class_counts();
    if toxic == 0 || non_toxic == 0 {
        return Err(CorpusError::SingleClass { toxic, non_toxic });
    }
    if toxic == non_toxic {
        return Ok(corpus.clone());
    }
    let majority_is_toxic = toxic > non_toxic;
    let (majority, minority): (Vec<usize>, Vec<usize>) =
        (0..corpus.len()).partition(|&i| corpus.samples[i].toxic == majority_is_toxic);
    let mut rng = stream_rng(seed, 0);
    let mut keep = minority.clone();
    keep.extend(index::sample(&mut rng, majority.len(), minority.len()).into_iter().map(|k| majority[k]));
    Ok(corpus.retain_indices(keep))
}

/// Proportional allocation of `budget` over strata of the given sizes with
/// largest-remainder rounding, then at least one slot per non-empty stratum.
/// Requires `budget <= sizes.sum()` and `budget >=` the non-empty count.
pub fn allocate(sizes: &[usize], budget: usize) -> Result<Vec<usize>, CorpusError> {
    let total: usize = sizes.iter().sum();
    let strata = sizes.iter().filter(|&&n| n > 0).count();
    if budget < strata {
        return Err(CorpusError::BudgetTooSmall { budget, strata });
    }
    if budget >= total {
        return Ok(sizes.to_vec());
    }
    let (b, t) = (budget as u128, total as u128);
    let mut alloc: Vec<usize> = sizes.iter().map(|&n| (b * n as u128 / t) as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // exact remainders; ties go to the larger stratum, then the earlier one
    order.sort_by(|&i, &j| {
        let ri = b * sizes[i] as u128 % t;
        let rj = b * sizes[j] as u128 % t;
        rj.cmp(&ri).then(sizes[j].cmp(&sizes[i])).then(i.cmp(&j))
    });
    let assigned: usize = alloc.iter().sum();
    for &i in order.iter().take(budget - assigned) {
        alloc[i] += 1;
    }
    for i in 0..sizes.len() {
        if sizes[i] > 0 && alloc[i] == 0 {
            let donor = (0..sizes.len())
                .filter(|&j| alloc[j] >= 2)
                .max_by(|&a, &b| alloc[a].cmp(&alloc[b]).then(sizes[a].cmp(&sizes[b])).then(b.cmp(&a)))
                .expect("budget covers every stratum");
            alloc[donor] -= 1;
            alloc[i] = 1;
        }
    }
    Ok(alloc)
}

/// Stratum key: the sample's full group set plus its label, so strata
/// partition the corpus even with multi-group samples.
fn stratum_key(s: &TextSample) -> (Vec<IdentityGroup>, bool) {
    (s.groups.iter().cloned().collect(), s.toxic)
}

/// Stratified sampling of at most `budget` samples over (group set × label)
/// strata. Strata are ordered by first appearance; stratum `k` draws from
/// stream `k` of `seed`.
pub fn sample_budget(corpus: &Corpus, budget: usize, seed: u64) -> Result<Corpus, CorpusError> {
    let mut strata: Vec<Vec<usize>> = Vec::new();
    let mut slot: BTreeMap<(Vec<IdentityGroup>, bool), usize> = BTreeMap::new();
    for (i, s) in corpus.samples.iter().enumerate() {
        let next = strata.len();
        let k = *slot.entry(stratum_key(s)).or_insert(next);
        if k == strata.len() {
            strata.push(Vec::new());
        }
        strata[k].push(i);
    }
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, budget)?;
    if budget >= corpus.len() {
        return Ok(corpus.clone());
    }
    let mut keep = Vec::with_capacity(budget);
    for (k, (members, &take)) in strata.iter().zip(&alloc).enumerate() {
        let mut rng = stream_rng(seed, k as u64);
        keep.extend(index::sample(&mut rng, members.len(), take).into_iter().map(|j| members[j]));
    }
    Ok(corpus.retain_indices(keep))
}
