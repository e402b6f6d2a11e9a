//! The audit pipeline: load and prepare corpora, score them with every
//! provider, compute aggregate, per-group and counterfactual statistics,
//! and assemble a deterministic report.

mod report;
mod validate;

pub use report::{
    AggregateRow, AuditReport, CftRow, ConservationRow, CorpusMeta, ErrorEntry, Formats, GroupRow, ProviderMeta,
    PsaMeta, ReportHeader, SkipEntry, SIGN_CONVENTION,
};
pub use validate::{synthetic_scored_corpus, validate_planted_bias, Assertion, ValidationError, ValidationReport};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use modaudit_core::corpus::{balance, map_groups, sample_budget, Corpus, CorpusError, TextSample};
use modaudit_core::metrics::{confusion_metrics, pinned_auc, roc_auc};
use modaudit_core::psa::{
    compute_cft, derive_corpus_pairs, generate_template_pairs, summarize_cft, CounterfactualPair, TokenLexicon,
};
use modaudit_core::scoring::ModerationScore;
use modaudit_core::seed::derive_seed;
use modaudit_core::{GroupRegistry, IdentityGroup};

use crate::config::{AuditConfig, ConfigError, CorpusConfig};
use crate::corpus_io::{load_corpus, CorpusFormat};
use crate::format::round6;
use crate::providers::{
    batch_score, BatchOutcome, BatchProgress, CacheError, Clock, Provider, ProviderCache, ProviderError, ScoreCache,
    SystemClock, Transport,
};
use crate::psa_io::{load_lexicon, load_templates};
use report::r6;

pub const TEMPLATE_SOURCE: &str = "templates";

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

impl AuditError {
    /// 2 for configuration and input problems, 1 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            AuditError::Config(_) | AuditError::Input(_) => 2,
            _ => 1,
        }
    }
}

/// What to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    /// Counterfactual statistics only.
    PsaOnly,
}

/// Runtime dependencies of a run, replaceable in tests.
pub struct RunContext<'a> {
    pub clock: Arc<dyn Clock>,
    pub env: &'a (dyn Fn(&str) -> Option<String> + Sync),
    /// Transports to use instead of HTTP, by provider id.
    pub transports: BTreeMap<String, Arc<dyn Transport>>,
}

fn process_env(name: &str) -> Option<String> {
    std::env::var(name).ok()
}

impl Default for RunContext<'_> {
    fn default() -> Self {
        RunContext { clock: Arc::new(SystemClock::new()), env: &process_env, transports: BTreeMap::new() }
    }
}

struct PreparedCorpus {
    meta: CorpusMeta,
    eval: Corpus,
}

struct PairSource {
    name: String,
    pairs: Vec<CounterfactualPair>,
}

struct PairRun {
    records: Vec<modaudit_core::psa::CftRecord>,
    errors: Vec<ProviderError>,
    /// (model_version, retrieved_at) of every scored text.
    provenance: Vec<(String, String)>,
}

struct ProviderRun {
    corpora: Vec<BatchOutcome>,
    pairs: Vec<PairRun>,
}

fn input_err(c: &CorpusConfig, e: impl std::fmt::Display) -> AuditError {
    AuditError::Input(format!("corpus `{}`: {e}", c.name))
}

fn prepare_corpus(config: &AuditConfig, c: &CorpusConfig, registry: &GroupRegistry) -> Result<PreparedCorpus, AuditError> {
    let path = config.resolve(&c.path);
    let format = c.format.unwrap_or_else(|| CorpusFormat::from_path(&path));
    let loaded = load_corpus(&path, &c.name, format, &c.schema).map_err(|e| AuditError::Input(e.to_string()))?;
    let mapped = map_groups(&loaded, &c.mapping, registry).map_err(|e| input_err(c, e))?;
    let balance_seed = derive_seed(config.seed, &format!("balance:{}", c.name));
    let balanced = balance(&mapped, balance_seed).map_err(|e: CorpusError| input_err(c, e))?;
    let (eval, budget_seed) = match config.budget {
        Some(b) => {
            let s = derive_seed(config.seed, &format!("budget:{}", c.name));
            (sample_budget(&balanced, b, s).map_err(|e| input_err(c, e))?, Some(s))
        }
        None => (balanced.clone(), None),
    };
    log::info!(
        "corpus `{}`: {} loaded, {} after balancing, {} evaluated",
        c.name,
        loaded.len(),
        balanced.len(),
        eval.len()
    );
    let meta = CorpusMeta {
        name: c.name.clone(),
        group_classifier: c.group_classifier.clone(),
        n_loaded: loaded.len(),
        n_balanced: balanced.len(),
        n_evaluated: eval.len(),
        balance_seed,
        budget_seed,
    };
    Ok(PreparedCorpus { meta, eval })
}

fn progress(p: BatchProgress<'_>) {
    log::debug!("{}: {}/{} scored ({} from cache)", p.provider, p.done, p.total, p.cache_hits);
}

fn score_pairs(provider: &Provider, cache: Option<&ProviderCache>, source: &PairSource) -> Result<PairRun, ProviderError> {
    let mut texts: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &source.pairs {
        for t in [p.anchor_text.as_str(), p.minority_text.as_str()] {
            if seen.insert(t) {
                texts.push(t);
            }
        }
    }
    let samples: Vec<TextSample> = texts
        .iter()
        .enumerate()
        .map(|(k, t)| TextSample::new(format!("{}#{k}", source.name), *t, false, source.name.clone()))
        .collect();
    let outcome = batch_score(provider, &samples, cache, &progress)?;
    let by_text: HashMap<&str, &Result<ModerationScore, ProviderError>> =
        texts.iter().copied().zip(outcome.results.iter()).collect();
    let (records, errors) = compute_cft(&source.pairs, provider.id(), |text| match by_text[text] {
        Ok(s) => Ok(s.hate_score),
        Err(e) => Err(e.clone()),
    })
    .expect("pair sources are non-empty");
    let errors = errors
        .into_iter()
        .map(|(pair_id, e)| ProviderError { text_id: pair_id, ..e })
        .collect();
    let provenance = outcome
        .results
        .iter()
        .flatten()
        .map(|s| (s.model_version.clone(), s.retrieved_at.clone()))
        .collect();
    Ok(PairRun { records, errors, provenance })
}

fn run_provider(
    provider: &Provider,
    cache: Option<Arc<ProviderCache>>,
    corpora: &[PreparedCorpus],
    sources: &[PairSource],
    mode: Mode,
) -> Result<ProviderRun, ProviderError> {
    let cache = cache.as_deref();
    let mut run = ProviderRun { corpora: Vec::new(), pairs: Vec::new() };
    if mode == Mode::Full {
        for c in corpora {
            run.corpora.push(batch_score(provider, c.eval.samples(), cache, &progress)?);
        }
    }
    for s in sources {
        run.pairs.push(score_pairs(provider, cache, s)?);
    }
    Ok(run)
}

fn aggregate_row(provider: &str, corpus: &str, scores: &[f64], flags: &[bool], labels: &[bool]) -> AggregateRow {
    let auc = roc_auc(scores, labels).ok();
    let conf = confusion_metrics(flags, labels).ok();
    let counts = conf.as_ref().map(|c| c.counts).unwrap_or_default();
    AggregateRow {
        provider: provider.into(),
        corpus: corpus.into(),
        n: scores.len(),
        roc_auc: r6(auc),
        f1: r6(conf.as_ref().and_then(|c| c.f1)),
        fpr: r6(conf.as_ref().and_then(|c| c.fpr)),
        fnr: r6(conf.as_ref().and_then(|c| c.fnr)),
        accuracy: r6(conf.as_ref().map(|c| c.accuracy)),
        tp: counts.tp,
        fp: counts.fp,
        tn: counts.tn,
        fn_: counts.fn_,
    }
}

#[allow(clippy::too_many_arguments)]
fn group_row(
    provider: &str,
    corpus: &str,
    group: &IdentityGroup,
    scores: &[f64],
    labels: &[bool],
    mask: &[bool],
    seed: u64,
    n_resamples: usize,
) -> GroupRow {
    let n_subgroup = mask.iter().filter(|&&m| m).count();
    let mut row = GroupRow {
        provider: provider.into(),
        corpus: corpus.into(),
        group: group.to_string(),
        pinned_auc: None,
        ci_low: None,
        ci_high: None,
        n_subgroup,
        n_background_per_resample: 0,
        n_resamples,
        n_valid_resamples: 0,
        seed,
        per_resample_values: Vec::new(),
        note: None,
    };
    match pinned_auc(group.clone(), scores, labels, mask, seed, n_resamples) {
        Ok(p) => {
            row.pinned_auc = Some(round6(p.value));
            row.ci_low = r6(p.ci_95.map(|c| c.0));
            row.ci_high = r6(p.ci_95.map(|c| c.1));
            row.n_background_per_resample = p.n_background_per_resample;
            row.n_valid_resamples = p.per_resample_values.len();
            row.per_resample_values = p.per_resample_values.into_iter().map(round6).collect();
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

fn error_entry(source: &str, e: &ProviderError) -> ErrorEntry {
    ErrorEntry {
        provider: e.provider.clone(),
        source: source.into(),
        id: e.text_id.clone(),
        kind: e.kind.tag().into(),
        message: e.kind.to_string(),
    }
}

/// Runs the configured audit. The configuration must already carry any
/// command-line overrides.
pub fn run_audit(config: &AuditConfig, mode: Mode, ctx: &RunContext<'_>) -> Result<AuditReport, AuditError> {
    let registry = if mode == Mode::Full { config.validate()? } else { config.validate_common()? };
    if mode == Mode::PsaOnly && config.providers.is_empty() {
        return Err(ConfigError::Invalid("at least one provider is required".into()).into());
    }

    let psa = config.psa.clone();
    let lexicon: TokenLexicon = load_lexicon(psa.as_ref().and_then(|p| p.lexicon.as_ref()).map(|p| config.resolve(p)).as_ref())
        .map_err(|e| AuditError::Input(e.to_string()))?;

    let mut corpora = Vec::new();
    let mut sources = Vec::new();
    let mut skips = Vec::new();
    let mut n_templates = 0;
    if let Some(psa) = &psa {
        if psa.templates.is_some() || psa.bundled_templates {
            let templates = load_templates(psa.templates.as_ref().map(|p| config.resolve(p)).as_ref())
                .map_err(|e| AuditError::Input(e.to_string()))?;
            n_templates = templates.len();
            let pairs = generate_template_pairs(&templates, &lexicon).map_err(|e| AuditError::Input(format!("templates: {e}")))?;
            if !pairs.is_empty() {
                sources.push(PairSource { name: TEMPLATE_SOURCE.into(), pairs });
            }
        }
    }
    for c in &config.corpora {
        let needed = mode == Mode::Full || (psa.is_some() && c.derive_pairs);
        if !needed {
            continue;
        }
        let prepared = prepare_corpus(config, c, &registry)?;
        if psa.is_some() && c.derive_pairs {
            let derived = derive_corpus_pairs(&prepared.eval, &lexicon);
            skips.extend(derived.skips.into_iter().map(|s| SkipEntry {
                source: c.name.clone(),
                sample_id: s.sample_id,
                reason: s.reason,
            }));
            if !derived.pairs.is_empty() {
                sources.push(PairSource { name: c.name.clone(), pairs: derived.pairs });
            }
        }
        corpora.push(prepared);
    }

    let mut providers = Vec::new();
    for spec in &config.providers {
        let provider = match ctx.transports.get(&spec.id) {
            Some(t) => Provider::with_transport(spec.clone(), t.clone(), ctx.clock.clone()),
            None => Provider::build(spec.clone(), &lexicon, ctx.env, ctx.clock.clone()),
        }
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        provider.check_credentials()?;
        providers.push(provider);
    }

    let cache = if providers.iter().any(Provider::uses_cache) {
        let dir = config.cache_dir();
        Some(ScoreCache::open(&dir)?)
    } else {
        None
    };
    let mut caches = Vec::new();
    for p in &providers {
        caches.push(match (&cache, p.uses_cache()) {
            (Some(c), true) => {
                let pc = c.provider(p.id())?;
                if pc.recovered_truncation() {
                    log::warn!("cache for `{}` had a truncated final line; it was dropped", p.id());
                }
                Some(pc)
            }
            _ => None,
        });
    }

    let runs: Vec<Result<ProviderRun, ProviderError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = providers
            .iter()
            .zip(&caches)
            .map(|(p, c)| {
                let (corpora, sources) = (&corpora, &sources);
                scope.spawn(move || run_provider(p, c.clone(), corpora, sources, mode))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("provider thread panicked")).collect()
    });
    let runs: Vec<ProviderRun> = runs.into_iter().collect::<Result<_, _>>()?;

    Ok(assemble(config, &registry, &lexicon, psa.map(|p| (p.level, n_templates)), &providers, &corpora, &sources, runs, skips))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    config: &AuditConfig,
    registry: &GroupRegistry,
    lexicon: &TokenLexicon,
    psa: Option<(f64, usize)>,
    providers: &[Provider],
    corpora: &[PreparedCorpus],
    sources: &[PairSource],
    runs: Vec<ProviderRun>,
    skips: Vec<SkipEntry>,
) -> AuditReport {
    let mut aggregate = Vec::new();
    let mut groups = Vec::new();
    let mut cft = Vec::new();
    let mut conservation = Vec::new();
    let mut errors = Vec::new();
    let mut provider_meta = Vec::new();

    for (provider, run) in providers.iter().zip(runs) {
        let pid = provider.id();
        let mut versions = BTreeSet::new();
        let mut times: Vec<String> = Vec::new();

        for (c, outcome) in corpora.iter().zip(&run.corpora) {
            let name = &c.meta.name;
            let mut scores = Vec::new();
            let mut flags = Vec::new();
            let mut labels = Vec::new();
            let mut members: Vec<&TextSample> = Vec::new();
            for (sample, result) in c.eval.samples().iter().zip(&outcome.results) {
                match result {
                    Ok(s) => {
                        versions.insert(s.model_version.clone());
                        times.push(s.retrieved_at.clone());
                        scores.push(s.hate_score);
                        flags.push(s.flagged);
                        labels.push(sample.toxic);
                        members.push(sample);
                    }
                    Err(e) => errors.push(error_entry(name, e)),
                }
            }
            conservation.push(ConservationRow {
                provider: pid.into(),
                source: name.clone(),
                unit: "sample".into(),
                submitted: c.eval.len(),
                scored: scores.len(),
                errored: outcome.results.len() - scores.len(),
            });
            aggregate.push(aggregate_row(pid, name, &scores, &flags, &labels));
            for g in registry.iter() {
                let mask: Vec<bool> = members.iter().map(|s| s.in_group(g)).collect();
                let seed = derive_seed(config.seed, &format!("pinned:{name}:{g}"));
                groups.push(group_row(pid, name, g, &scores, &labels, &mask, seed, config.n_resamples));
            }
        }

        let level = psa.map_or(0.95, |p| p.0);
        for (source, pr) in sources.iter().zip(&run.pairs) {
            errors.extend(pr.errors.iter().map(|e| error_entry(&source.name, e)));
            conservation.push(ConservationRow {
                provider: pid.into(),
                source: source.name.clone(),
                unit: "pair".into(),
                submitted: source.pairs.len(),
                scored: pr.records.len(),
                errored: pr.errors.len(),
            });
            for s in summarize_cft(&pr.records, &source.pairs, level) {
                cft.push(CftRow {
                    provider: pid.into(),
                    source: source.name.clone(),
                    group: s.group.to_string(),
                    toxic_slice: s.toxic_slice.as_str().into(),
                    n_pairs: s.n_pairs,
                    mean_cft: round6(s.mean_cft),
                    ci_low: r6(s.ci_95.map(|c| c.0)),
                    ci_high: r6(s.ci_95.map(|c| c.1)),
                });
            }
        }
        for pr in &run.pairs {
            for (version, at) in &pr.provenance {
                versions.insert(version.clone());
                times.push(at.clone());
            }
        }
        times.sort();
        provider_meta.push(ProviderMeta {
            id: pid.into(),
            kind: provider.spec().kind.as_str().into(),
            model_versions: versions.into_iter().collect(),
            retrieved_from: times.first().cloned(),
            retrieved_to: times.last().cloned(),
        });
    }

    AuditReport {
        header: ReportHeader {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_digest: config.digest(),
            seed: config.seed,
            n_resamples: config.n_resamples,
            budget: config.budget,
            sign_convention: SIGN_CONVENTION.into(),
            groups: registry.iter().map(|g| g.to_string()).collect(),
            providers: provider_meta,
            corpora: corpora.iter().map(|c| c.meta.clone()).collect(),
            psa: psa.map(|(level, n_templates)| PsaMeta {
                level,
                lexicon_tokens: lexicon.entries().len(),
                anchors: lexicon.anchors().clone(),
                n_templates,
            }),
        },
        aggregate,
        groups,
        cft,
        conservation,
        errors,
        skips,
    }
}
