use std::collections::{BTreeMap, BTreeSet};

use modaudit_core::scoring::DEFAULT_FLAG_THRESHOLD;
use modaudit_core::IdentityGroup;
use serde::{Deserialize, Serialize};

use super::ResponseSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    RemoteApi,
    Lexicon,
    PlantedBias,
    /// Serves stored responses from the cache only; misses are errors.
    Replay,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::RemoteApi => "remote-api",
            ProviderKind::Lexicon => "lexicon",
            ProviderKind::PlantedBias => "planted-bias",
            ProviderKind::Replay => "replay",
        }
    }

    pub fn uses_cache(self) -> bool {
        matches!(self, ProviderKind::RemoteApi | ProviderKind::Replay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    #[serde(default = "RetryPolicy::default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "RetryPolicy::default_backoff")]
    pub base_backoff_ms: u64,
}

impl RetryPolicy {
    fn default_attempts() -> u32 {
        5
    }

    fn default_backoff() -> u64 {
        500
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: Self::default_attempts(), base_backoff_ms: Self::default_backoff() }
    }
}

fn default_rate_limit() -> f64 {
    1.0
}

fn default_concurrency() -> usize {
    1
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_flag_threshold() -> f64 {
    DEFAULT_FLAG_THRESHOLD
}

/// How to reach one scorer. Remote fields are ignored by local kinds and
/// vice versa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSpec {
    pub id: String,
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub schema: ResponseSchema,
    /// Name of the environment variable holding the secret.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_ref: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub category_mapping: BTreeSet<String>,
    #[serde(default = "default_rate_limit")]
    pub rate_limit: f64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Pinned model version, part of the cache key. `None` keys as "unknown".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub term_weights: BTreeMap<String, f64>,
    #[serde(default = "default_flag_threshold")]
    pub flag_threshold: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub deltas: BTreeMap<IdentityGroup, f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("provider `{0}`: id must be non-empty and use only [A-Za-z0-9_.-]")]
    BadId(String),
    #[error("provider `{0}`: rate_limit must be positive")]
    RateLimit(String),
    #[error("provider `{0}`: max_concurrency must be at least 1")]
    Concurrency(String),
    #[error("provider `{0}`: retry.max_attempts must be at least 1")]
    Attempts(String),
    #[error("provider `{0}`: category_mapping must be non-empty for {1} providers")]
    EmptyMapping(String, &'static str),
    #[error("provider `{0}`: remote providers need an endpoint")]
    MissingEndpoint(String),
    #[error("provider `{0}`: remote providers need a credential_ref")]
    MissingCredentialRef(String),
}

impl ProviderSpec {
    /// Minimal local lexicon scorer spec.
    pub fn lexicon(id: &str, term_weights: BTreeMap<String, f64>) -> Self {
        ProviderSpec {
            id: id.to_string(),
            kind: ProviderKind::Lexicon,
            endpoint: None,
            schema: ResponseSchema::default(),
            credential_ref: None,
            category_mapping: BTreeSet::new(),
            rate_limit: default_rate_limit(),
            max_concurrency: default_concurrency(),
            retry: RetryPolicy::default(),
            model_version: None,
            timeout_ms: default_timeout_ms(),
            term_weights,
            flag_threshold: DEFAULT_FLAG_THRESHOLD,
            deltas: BTreeMap::new(),
        }
    }

    /// Minimal remote spec for the generic schema.
    pub fn remote(id: &str, endpoint: &str, credential_ref: &str, mapping: &[&str]) -> Self {
        ProviderSpec {
            kind: ProviderKind::RemoteApi,
            endpoint: Some(endpoint.to_string()),
            credential_ref: Some(credential_ref.to_string()),
            category_mapping: mapping.iter().map(|s| s.to_string()).collect(),
            ..Self::lexicon(id, BTreeMap::new())
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let id = || self.id.clone();
        let id_ok = !self.id.is_empty()
            && self.id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            && !self.id.starts_with('.');
        if !id_ok {
            return Err(SpecError::BadId(id()));
        }
        if !(self.rate_limit > 0.0 && self.rate_limit.is_finite()) {
            return Err(SpecError::RateLimit(id()));
        }
        if self.max_concurrency < 1 {
            return Err(SpecError::Concurrency(id()));
        }
        if self.retry.max_attempts < 1 {
            return Err(SpecError::Attempts(id()));
        }
        if self.kind.uses_cache() && self.category_mapping.is_empty() {
            return Err(SpecError::EmptyMapping(id(), self.kind.as_str()));
        }
        if self.kind == ProviderKind::RemoteApi {
            if self.endpoint.is_none() {
                return Err(SpecError::MissingEndpoint(id()));
            }
            if self.credential_ref.is_none() {
                return Err(SpecError::MissingCredentialRef(id()));
            }
        }
        Ok(())
    }

    pub fn cache_model_version(&self) -> &str {
        self.model_version.as_deref().unwrap_or(modaudit_core::scoring::UNKNOWN_MODEL_VERSION)
    }
}
