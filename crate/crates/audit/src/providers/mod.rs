//! Uniform access to moderation scorers: remote services over HTTP and
//! deterministic local scorers, behind one normalized score type.

mod batch;
mod cache;
mod clock;
mod error;
mod http;
mod provider;
mod ratelimit;
mod schema;
mod spec;

pub use batch::{batch_score, BatchOutcome, BatchProgress};
pub use cache::{cache_key, CacheError, CacheRecord, ProviderCache, ScoreCache};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::{ProviderError, ProviderErrorKind};
pub use http::{HttpTransport, ScoreRequest, Transport, TransportError, TransportResponse};
pub use provider::{BuildError, Provider, LOCAL_MODEL_VERSION, LOCAL_RETRIEVED_AT};
pub use ratelimit::RateLimiter;
pub use schema::{normalize_response, Extracted, ResponseSchema};
pub use spec::{ProviderKind, ProviderSpec, RetryPolicy, SpecError};
