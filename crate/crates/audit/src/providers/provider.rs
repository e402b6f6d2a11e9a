use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use modaudit_core::psa::TokenLexicon;
use modaudit_core::scoring::{make_planted_bias_scorer, LexiconError, LexiconScorer, ModerationScore};
use rand::Rng;
use serde_json::Value;

use super::{
    cache_key, normalize_response, CacheRecord, Clock, HttpTransport, ProviderCache, ProviderError,
    ProviderErrorKind, ProviderKind, ProviderSpec, RateLimiter, ScoreRequest, SpecError, Transport,
    TransportError,
};

/// Model version reported by the local scorers.
pub const LOCAL_MODEL_VERSION: &str = "local";
/// Retrieval time reported by the local scorers. They are deterministic, so
/// a fixed stamp keeps reports reproducible.
pub const LOCAL_RETRIEVED_AT: &str = "1970-01-01T00:00:00Z";

const MAX_BACKOFF: Duration = Duration::from_secs(60);

enum Backend {
    Remote { transport: Option<Arc<dyn Transport>> },
    Local(LexiconScorer),
    Replay,
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("provider `{0}`: {1}")]
    Lexicon(String, LexiconError),
}

/// A ready-to-use scorer built from a [`ProviderSpec`]. Shareable across
/// threads; the rate limiter is per provider.
pub struct Provider {
    spec: ProviderSpec,
    backend: Backend,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl Provider {
    /// Builds a provider. Remote credentials are read through `env`; a
    /// missing variable is reported as a fatal error on first use.
    pub fn build(
        spec: ProviderSpec,
        lexicon: &TokenLexicon,
        env: &dyn Fn(&str) -> Option<String>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, BuildError> {
        spec.validate()?;
        let backend = match spec.kind {
            ProviderKind::RemoteApi => {
                let var = spec.credential_ref.as_deref().expect("validated");
                let transport = env(var).map(|secret| {
                    Arc::new(HttpTransport::new(
                        spec.endpoint.as_deref().expect("validated"),
                        spec.schema,
                        &secret,
                        Duration::from_millis(spec.timeout_ms),
                        spec.model_version.clone(),
                    )) as Arc<dyn Transport>
                });
                Backend::Remote { transport }
            }
            ProviderKind::Lexicon | ProviderKind::PlantedBias => {
                let lex_err = |e| BuildError::Lexicon(spec.id.clone(), e);
                let base = LexiconScorer::new(spec.term_weights.clone(), spec.flag_threshold).map_err(lex_err)?;
                let deltas = if spec.kind == ProviderKind::PlantedBias { spec.deltas.clone() } else { BTreeMap::new() };
                Backend::Local(make_planted_bias_scorer(&base, &deltas, lexicon).map_err(lex_err)?)
            }
            ProviderKind::Replay => Backend::Replay,
        };
        Ok(Provider { limiter: RateLimiter::new(spec.rate_limit, clock.clone()), spec, backend, clock })
    }

    /// A remote provider talking through `transport` instead of HTTP.
    pub fn with_transport(spec: ProviderSpec, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Result<Self, BuildError> {
        spec.validate()?;
        Ok(Provider {
            limiter: RateLimiter::new(spec.rate_limit, clock.clone()),
            spec,
            backend: Backend::Remote { transport: Some(transport) },
            clock,
        })
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn uses_cache(&self) -> bool {
        !matches!(self.backend, Backend::Local(_))
    }

    /// The local scorer, for lexicon and planted-bias providers.
    pub fn local_scorer(&self) -> Option<&LexiconScorer> {
        match &self.backend {
            Backend::Local(s) => Some(s),
            _ => None,
        }
    }

    /// Reports a missing credential without issuing a request.
    pub fn check_credentials(&self) -> Result<(), ProviderError> {
        match &self.backend {
            Backend::Remote { transport: None } => Err(self.error("", self.credential_missing())),
            _ => Ok(()),
        }
    }

    fn credential_missing(&self) -> ProviderErrorKind {
        ProviderErrorKind::CredentialMissing(self.spec.credential_ref.clone().unwrap_or_default())
    }

    fn error(&self, text_id: &str, kind: ProviderErrorKind) -> ProviderError {
        ProviderError::new(&self.spec.id, text_id, kind)
    }

    pub fn cache_key(&self, text: &str) -> String {
        cache_key(&self.spec.id, self.spec.cache_model_version(), text)
    }

    fn score_from_record(&self, text_id: &str, record: CacheRecord) -> Result<ModerationScore, ProviderError> {
        let extracted = self
            .spec
            .schema
            .extract(&record.raw_response)
            .map_err(|m| self.error(text_id, ProviderErrorKind::Cache(format!("stored response unreadable: {m}"))))?;
        Ok(ModerationScore {
            text_id: text_id.to_string(),
            provider_id: self.spec.id.clone(),
            model_version: record.model_version,
            sub_scores: extracted.sub_scores,
            hate_score: record.hate_score,
            flagged: record.flagged,
            retrieved_at: record.retrieved_at,
            from_cache: true,
        })
    }

    /// Cache lookup only; `None` on a miss or for local scorers.
    pub fn cached(&self, text_id: &str, text: &str, cache: Option<&ProviderCache>) -> Result<Option<ModerationScore>, ProviderError> {
        if !self.uses_cache() {
            return Ok(None);
        }
        match cache.and_then(|c| c.get(&self.cache_key(text))) {
            Some(record) => self.score_from_record(text_id, record).map(Some),
            None => Ok(None),
        }
    }

    /// Scores without consulting the cache; remote results are stored.
    pub fn score_uncached(&self, text_id: &str, text: &str, cache: Option<&ProviderCache>) -> Result<ModerationScore, ProviderError> {
        if text.is_empty() {
            return Err(self.error(text_id, ProviderErrorKind::EmptyText));
        }
        match &self.backend {
            Backend::Local(scorer) => {
                let score = scorer.score(text);
                Ok(ModerationScore {
                    text_id: text_id.to_string(),
                    provider_id: self.spec.id.clone(),
                    model_version: LOCAL_MODEL_VERSION.to_string(),
                    sub_scores: [("hate".to_string(), score)].into_iter().collect(),
                    hate_score: score,
                    flagged: scorer.flagged(score),
                    retrieved_at: LOCAL_RETRIEVED_AT.to_string(),
                    from_cache: false,
                })
            }
            Backend::Replay => Err(self.error(text_id, ProviderErrorKind::CacheMiss)),
            Backend::Remote { transport: None } => Err(self.error(text_id, self.credential_missing())),
            Backend::Remote { transport: Some(transport) } => {
                let (raw, score) = self.fetch(transport.as_ref(), text_id, text)?;
                if let Some(cache) = cache {
                    let record = CacheRecord {
                        key: self.cache_key(text),
                        model_version: score.model_version.clone(),
                        retrieved_at: score.retrieved_at.clone(),
                        raw_response: raw,
                        hate_score: score.hate_score,
                        flagged: score.flagged,
                    };
                    cache
                        .append(record)
                        .map_err(|e| self.error(text_id, ProviderErrorKind::Cache(e.to_string())))?;
                }
                Ok(score)
            }
        }
    }

    /// Cached score if present, otherwise a fresh one.
    pub fn score_text(&self, text_id: &str, text: &str, cache: Option<&ProviderCache>) -> Result<ModerationScore, ProviderError> {
        if text.is_empty() {
            return Err(self.error(text_id, ProviderErrorKind::EmptyText));
        }
        match self.cached(text_id, text, cache)? {
            Some(score) => Ok(score),
            None => self.score_uncached(text_id, text, cache),
        }
    }

    // Retries 429, 5xx, timeouts, transport failures and unparseable bodies
    // with full-jitter exponential backoff.
    fn fetch(&self, transport: &dyn Transport, text_id: &str, text: &str) -> Result<(Value, ModerationScore), ProviderError> {
        let policy = self.spec.retry;
        let mut last = String::new();
        let mut malformed: Option<String> = None;
        for attempt in 1..=policy.max_attempts {
            let issued_at = self.limiter.acquire();
            let request = ScoreRequest { provider_id: &self.spec.id, text_id, text, issued_at };
            match transport.send(&request) {
                Ok(resp) if (200..300).contains(&resp.status) => match serde_json::from_str::<Value>(&resp.body) {
                    Ok(raw) => match normalize_response(&raw, &self.spec, text_id, &now_rfc3339()) {
                        Ok(score) => return Ok((raw, score)),
                        Err(ProviderErrorKind::MalformedResponse(m)) => malformed = Some(m),
                        Err(kind) => return Err(self.error(text_id, kind)),
                    },
                    Err(e) => malformed = Some(format!("body is not JSON: {e}")),
                },
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    malformed = None;
                    last = format!("HTTP {}", resp.status);
                }
                Ok(resp) if resp.status == 401 || resp.status == 403 => {
                    return Err(self.error(text_id, ProviderErrorKind::CredentialRejected(resp.status)));
                }
                Ok(resp) => {
                    let body: String = resp.body.chars().take(200).collect();
                    return Err(self.error(text_id, ProviderErrorKind::TextRejected { status: resp.status, body }));
                }
                Err(e) => {
                    malformed = None;
                    last = match e {
                        TransportError::Timeout => "timeout".to_string(),
                        TransportError::Io(m) => m,
                    };
                }
            }
            if attempt < policy.max_attempts {
                let cap = Duration::from_millis(policy.base_backoff_ms)
                    .saturating_mul(1u32 << (attempt - 1).min(16))
                    .min(MAX_BACKOFF);
                let wait = rand::rng().random_range(Duration::ZERO..=cap);
                self.clock.sleep(wait);
            }
        }
        let kind = match malformed {
            Some(m) => ProviderErrorKind::MalformedResponse(m),
            None => ProviderErrorKind::RateLimitExhausted { attempts: policy.max_attempts, last },
        };
        Err(self.error(text_id, kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{ManualClock, TransportResponse};
    use std::sync::Mutex;

    struct Scripted(Mutex<Vec<Result<TransportResponse, TransportError>>>);

    impl Transport for Scripted {
        fn send(&self, _: &ScoreRequest<'_>) -> Result<TransportResponse, TransportError> {
            self.0.lock().unwrap().remove(0)
        }
    }

    fn resp(status: u16, body: &str) -> Result<TransportResponse, TransportError> {
        Ok(TransportResponse { status, body: body.to_string() })
    }

    fn provider(script: Vec<Result<TransportResponse, TransportError>>) -> Provider {
        let spec = ProviderSpec::remote("p", "http://localhost", "KEY", &["hate"]);
        Provider::with_transport(spec, Arc::new(Scripted(Mutex::new(script))), Arc::new(ManualClock::new())).unwrap()
    }

    const OK: &str = r#"{"sub_scores":{"hate":0.8}}"#;

    #[test]
    fn transient_failures_are_retried() {
        let p = provider(vec![resp(429, ""), Err(TransportError::Timeout), resp(503, ""), resp(200, OK)]);
        let s = p.score_text("t", "hello", None).unwrap();
        assert_eq!(s.hate_score, 0.8);
        assert!(s.flagged);
    }

    #[test]
    fn retries_are_bounded() {
        let p = provider((0..5).map(|_| resp(500, "")).collect());
        let e = p.score_text("t", "hello", None).unwrap_err();
        assert_eq!(e.kind, ProviderErrorKind::RateLimitExhausted { attempts: 5, last: "HTTP 500".into() });
        assert_eq!(e.text_id, "t");
    }

    #[test]
    fn status_classes() {
        let e = provider(vec![resp(403, "")]).score_text("t", "x", None).unwrap_err();
        assert!(e.kind.is_fatal());
        let e = provider(vec![resp(400, "too long")]).score_text("t", "x", None).unwrap_err();
        assert_eq!(e.kind, ProviderErrorKind::TextRejected { status: 400, body: "too long".into() });
        let e = provider((0..5).map(|_| resp(200, "not json")).collect()).score_text("t", "x", None).unwrap_err();
        assert_eq!(e.kind.tag(), "malformed-response");
        let e = provider(vec![resp(200, r#"{"sub_scores":{"sexual":0.1}}"#)]).score_text("t", "x", None).unwrap_err();
        assert_eq!(e.kind, ProviderErrorKind::UnknownCategory("hate".into()));
    }

    #[test]
    fn empty_text_is_not_sent() {
        let e = provider(vec![]).score_text("t", "", None).unwrap_err();
        assert_eq!(e.kind, ProviderErrorKind::EmptyText);
    }

    #[test]
    fn missing_credential_is_fatal() {
        let spec = ProviderSpec::remote("p", "http://localhost", "MODAUDIT_TEST_UNSET", &["hate"]);
        let entry = modaudit_core::psa::LexiconEntry {
            token: "gay".into(),
            group: "LGBTQ+".into(),
            axis: "orientation".into(),
            anchor: None,
        };
        let anchors = [("orientation".to_string(), vec!["straight".to_string()])].into_iter().collect();
        let lex = TokenLexicon::new(vec![entry], anchors).unwrap();
        let p = Provider::build(spec, &lex, &|_| None, Arc::new(ManualClock::new())).unwrap();
        let e = p.check_credentials().unwrap_err();
        assert_eq!(e.kind, ProviderErrorKind::CredentialMissing("MODAUDIT_TEST_UNSET".into()));
    }

    #[test]
    fn cache_hit_skips_transport() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ProviderCache::open(&dir.path().join("p.jsonl")).unwrap();
        let p = provider(vec![resp(200, OK)]);
        let first = p.score_text("a", "hello", Some(&cache)).unwrap();
        let second = p.score_text("b", "hello", Some(&cache)).unwrap();
        assert!(!first.from_cache && second.from_cache);
        assert_eq!(first.retrieved_at, second.retrieved_at);
        assert_eq!(second.text_id, "b");
        assert_eq!(second.hate_score, 0.8);
    }
}
