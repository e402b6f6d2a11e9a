use std::fmt;

/// A scoring failure, always tied to the provider and text it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderError {
    pub provider: String,
    pub text_id: String,
    pub kind: ProviderErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderErrorKind {
    #[error("credential environment variable `{0}` is not set")]
    CredentialMissing(String),
    #[error("credential rejected (HTTP {0})")]
    CredentialRejected(u16),
    #[error("retries exhausted after {attempts} attempts (last: {last})")]
    RateLimitExhausted { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("text rejected (HTTP {status}): {body}")]
    TextRejected { status: u16, body: String },
    #[error("mapped category `{0}` is absent from the response")]
    UnknownCategory(String),
    #[error("text is empty")]
    EmptyText,
    #[error("no cached response to replay")]
    CacheMiss,
    #[error("cache failure: {0}")]
    Cache(String),
    #[error("sample id appears more than once in the batch")]
    DuplicateId,
}

impl ProviderErrorKind {
    /// Stable kebab-case tag used in ledgers.
    pub fn tag(&self) -> &'static str {
        match self {
            ProviderErrorKind::CredentialMissing(_) => "credential-missing",
            ProviderErrorKind::CredentialRejected(_) => "credential-rejected",
            ProviderErrorKind::RateLimitExhausted { .. } => "rate-limit-exhausted",
            ProviderErrorKind::MalformedResponse(_) => "malformed-response",
            ProviderErrorKind::TextRejected { .. } => "text-rejected",
            ProviderErrorKind::UnknownCategory(_) => "unknown-category",
            ProviderErrorKind::EmptyText => "empty-text",
            ProviderErrorKind::CacheMiss => "cache-miss",
            ProviderErrorKind::Cache(_) => "cache",
            ProviderErrorKind::DuplicateId => "duplicate-id",
        }
    }

    /// Errors that stop a whole batch instead of one sample.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            ProviderErrorKind::CredentialMissing(_)
                | ProviderErrorKind::CredentialRejected(_)
                | ProviderErrorKind::Cache(_)
                | ProviderErrorKind::DuplicateId
        )
    }
}

impl ProviderError {
    pub fn new(provider: &str, text_id: &str, kind: ProviderErrorKind) -> Self {
        ProviderError { provider: provider.to_string(), text_id: text_id.to_string(), kind }
    }
}

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "provider `{}`, text `{}`: {}", self.provider, self.text_id, self.kind)
    }
}

impl std::error::Error for ProviderError {}
