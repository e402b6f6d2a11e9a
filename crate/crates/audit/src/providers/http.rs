use std::time::Duration;

use ureq::Agent;

use super::ResponseSchema;

/// One scoring call. `issued_at` is the rate limiter's release time.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub provider_id: &'a str,
    pub text_id: &'a str,
    pub text: &'a str,
    pub issued_at: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Io(String),
}

/// Sends one scoring request and returns the raw HTTP outcome. Non-2xx
/// statuses are responses, not errors.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ScoreRequest<'_>) -> Result<TransportResponse, TransportError>;
}

pub struct HttpTransport {
    agent: Agent,
    endpoint: String,
    schema: ResponseSchema,
    auth: (&'static str, String),
    model_version: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: &str, schema: ResponseSchema, secret: &str, timeout: Duration, model_version: Option<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: endpoint.to_string(),
            schema,
            auth: schema.auth_header(secret),
            model_version,
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ScoreRequest<'_>) -> Result<TransportResponse, TransportError> {
        let (content_type, body) = self.schema.request_body(request.text, self.model_version.as_deref());
        let response = self
            .agent
            .post(&self.endpoint)
            .header(self.auth.0, &self.auth.1)
            .content_type(content_type)
            .send(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => TransportError::Timeout,
                other => TransportError::Io(other.to_string()),
            })?;
        let status = response.status().as_u16();
        let body = response
            .into_body()
            .read_to_string()
            .map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(TransportResponse { status, body })
    }
}
