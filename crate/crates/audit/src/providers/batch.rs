use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use modaudit_core::corpus::TextSample;
use modaudit_core::scoring::ModerationScore;

use super::{Provider, ProviderCache, ProviderError, ProviderErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchProgress<'a> {
    pub provider: &'a str,
    pub done: usize,
    pub total: usize,
    pub cache_hits: usize,
}

/// Per-sample results, aligned with the input order.
#[derive(Debug)]
pub struct BatchOutcome {
    pub results: Vec<Result<ModerationScore, ProviderError>>,
    pub cache_hits: usize,
    pub requests: usize,
}

impl BatchOutcome {
    pub fn n_ok(&self) -> usize {
        self.results.iter().filter(|r| r.is_ok()).count()
    }

    pub fn errors(&self) -> impl Iterator<Item = &ProviderError> {
        self.results.iter().filter_map(|r| r.as_ref().err())
    }
}

fn with_id(result: &Result<ModerationScore, ProviderError>, id: &str) -> Result<ModerationScore, ProviderError> {
    match result {
        Ok(s) => Ok(ModerationScore { text_id: id.to_string(), ..s.clone() }),
        Err(e) => Err(ProviderError { text_id: id.to_string(), ..e.clone() }),
    }
}

/// Scores every sample, serving cache hits first and sending each distinct
/// uncached text once, with at most `max_concurrency` calls in flight.
///
/// Per-sample failures are returned in place. A fatal failure (rejected or
/// missing credentials, cache IO) stops the batch and is returned as `Err`.
pub fn batch_score(
    provider: &Provider,
    samples: &[TextSample],
    cache: Option<&ProviderCache>,
    progress: &(dyn Fn(BatchProgress<'_>) + Sync),
) -> Result<BatchOutcome, ProviderError> {
    let mut seen = BTreeSet::new();
    for s in samples {
        if !seen.insert(s.id.as_str()) {
            return Err(ProviderError::new(provider.id(), &s.id, ProviderErrorKind::DuplicateId));
        }
    }

    let total = samples.len();
    let mut results: Vec<Option<Result<ModerationScore, ProviderError>>> = vec![None; total];
    let mut cache_hits = 0;
    let mut work: Vec<Vec<usize>> = Vec::new();
    let mut by_text: HashMap<&str, usize> = HashMap::new();
    for (i, s) in samples.iter().enumerate() {
        match provider.cached(&s.id, &s.text, cache) {
            Ok(Some(score)) => {
                results[i] = Some(Ok(score));
                cache_hits += 1;
            }
            Ok(None) => {
                let slot = *by_text.entry(s.text.as_str()).or_insert_with(|| {
                    work.push(Vec::new());
                    work.len() - 1
                });
                work[slot].push(i);
            }
            Err(e) => return Err(e),
        }
    }

    let done = AtomicUsize::new(cache_hits);
    if cache_hits > 0 {
        progress(BatchProgress { provider: provider.id(), done: cache_hits, total, cache_hits });
    }

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let fatal: Mutex<Option<ProviderError>> = Mutex::new(None);
    let fresh: Mutex<Vec<Option<Result<ModerationScore, ProviderError>>>> = Mutex::new(vec![None; work.len()]);
    let workers = provider.spec().max_concurrency.max(1).min(work.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= work.len() {
                    break;
                }
                let first = &samples[work[k][0]];
                let result = provider.score_uncached(&first.id, &first.text, cache);
                if let Err(e) = &result {
                    if e.kind.is_fatal() {
                        abort.store(true, Ordering::SeqCst);
                        fatal.lock().unwrap().get_or_insert_with(|| e.clone());
                    }
                }
                fresh.lock().unwrap()[k] = Some(result);
                let d = done.fetch_add(work[k].len(), Ordering::SeqCst) + work[k].len();
                progress(BatchProgress { provider: provider.id(), done: d, total, cache_hits });
            });
        }
    });

    if let Some(e) = fatal.into_inner().unwrap() {
        return Err(e);
    }
    let fresh = fresh.into_inner().unwrap();
    for (group, result) in work.iter().zip(&fresh) {
        let result = result.as_ref().expect("every work item completes without a fatal error");
        for &i in group {
            results[i] = Some(with_id(result, &samples[i].id));
        }
    }
    Ok(BatchOutcome {
        results: results.into_iter().map(|r| r.expect("every sample has a result")).collect(),
        cache_hits,
        requests: work.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{
        ManualClock, ProviderSpec, ResponseSchema, ScoreRequest, Transport, TransportError, TransportResponse,
    };
    use std::sync::Arc;

    struct Echo {
        calls: AtomicUsize,
        in_flight: AtomicUsize,
        peak: AtomicUsize,
        reject_after: Option<usize>,
    }

    impl Echo {
        fn new() -> Self {
            Echo { calls: AtomicUsize::new(0), in_flight: AtomicUsize::new(0), peak: AtomicUsize::new(0), reject_after: None }
        }
    }

    impl Transport for Echo {
        fn send(&self, req: &ScoreRequest<'_>) -> Result<TransportResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            let cur = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(cur, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(1));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            if self.reject_after.is_some_and(|k| n >= k) {
                return Ok(TransportResponse { status: 401, body: String::new() });
            }
            let score = (req.text.len() % 10) as f64 / 10.0;
            Ok(TransportResponse { status: 200, body: format!("{{\"sub_scores\":{{\"hate\":{score}}}}}") })
        }
    }

    fn spec(concurrency: usize) -> ProviderSpec {
        let mut spec = ProviderSpec::remote("mock", "http://localhost", "MOCK_KEY", &["hate"]);
        spec.schema = ResponseSchema::Generic;
        spec.rate_limit = 1000.0;
        spec.max_concurrency = concurrency;
        spec
    }

    fn samples(n: usize) -> Vec<TextSample> {
        (0..n).map(|i| TextSample::new(format!("s{i}"), format!("text number {i}"), i % 2 == 0, "test")).collect()
    }

    fn no_progress(_: BatchProgress<'_>) {}

    #[test]
    fn cached_samples_are_not_requested() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ProviderCache::open(&dir.path().join("mock.jsonl")).unwrap();
        let transport = Arc::new(Echo::new());
        let provider = Provider::with_transport(spec(4), transport.clone(), Arc::new(ManualClock::new())).unwrap();
        let all = samples(100);
        let warm = batch_score(&provider, &all[..40], Some(&cache), &no_progress).unwrap();
        assert_eq!(warm.requests, 40);
        assert_eq!(transport.calls.load(Ordering::SeqCst), 40);

        let out = batch_score(&provider, &all, Some(&cache), &no_progress).unwrap();
        assert_eq!(transport.calls.load(Ordering::SeqCst), 100);
        assert_eq!(out.cache_hits, 40);
        assert_eq!(out.requests, 60);
        assert_eq!(out.n_ok(), 100);
        for (s, r) in all.iter().zip(&out.results) {
            assert_eq!(r.as_ref().unwrap().text_id, s.id);
        }
        assert!(out.results[..40].iter().all(|r| r.as_ref().unwrap().from_cache));
        assert!(out.results[40..].iter().all(|r| !r.as_ref().unwrap().from_cache));
    }

    #[test]
    fn empty_batch_sends_nothing() {
        let transport = Arc::new(Echo::new());
        let provider = Provider::with_transport(spec(2), transport.clone(), Arc::new(ManualClock::new())).unwrap();
        let out = batch_score(&provider, &[], None, &no_progress).unwrap();
        assert!(out.results.is_empty());
        assert_eq!(transport.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn concurrency_is_capped() {
        let transport = Arc::new(Echo::new());
        let provider = Provider::with_transport(spec(3), transport.clone(), Arc::new(ManualClock::new())).unwrap();
        batch_score(&provider, &samples(40), None, &no_progress).unwrap();
        assert!(transport.peak.load(Ordering::SeqCst) <= 3);
    }

    #[test]
    fn duplicate_texts_are_sent_once() {
        let transport = Arc::new(Echo::new());
        let provider = Provider::with_transport(spec(2), transport.clone(), Arc::new(ManualClock::new())).unwrap();
        let batch = vec![
            TextSample::new("a", "same text", true, "t"),
            TextSample::new("b", "same text", false, "t"),
            TextSample::new("c", "other", false, "t"),
        ];
        let out = batch_score(&provider, &batch, None, &no_progress).unwrap();
        assert_eq!(transport.calls.load(Ordering::SeqCst), 2);
        assert_eq!(out.results[1].as_ref().unwrap().text_id, "b");
    }

    #[test]
    fn rejected_credentials_abort() {
        let mut echo = Echo::new();
        echo.reject_after = Some(5);
        let transport = Arc::new(echo);
        let provider = Provider::with_transport(spec(1), transport.clone(), Arc::new(ManualClock::new())).unwrap();
        let err = batch_score(&provider, &samples(50), None, &no_progress).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::CredentialRejected(401));
        assert_eq!(transport.calls.load(Ordering::SeqCst), 6);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let transport = Arc::new(Echo::new());
        let provider = Provider::with_transport(spec(1), transport, Arc::new(ManualClock::new())).unwrap();
        let batch = vec![TextSample::new("a", "x", true, "t"), TextSample::new("a", "y", false, "t")];
        let err = batch_score(&provider, &batch, None, &no_progress).unwrap_err();
        assert_eq!(err.kind, ProviderErrorKind::DuplicateId);
    }
}
