//! Plain-HTTP transport for the scoring protocol.

use std::time::Duration;

use serde::de::DeserializeOwned;

use super::client::{Transport, TransportError};
use super::protocol::{Capabilities, Health, ScoreRequest, ScoreResponse, HEALTH_PATH, METRICS_PATH, SCORE_PATH, TOKEN_ENV};

pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
    token: Option<String>,
}

impl HttpTransport {
    /// `endpoint` is the service root, e.g. `http://127.0.0.1:8600`.
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            base: endpoint.trim_end_matches('/').to_string(),
            agent,
            token: None,
        }
    }

    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token.filter(|t| !t.is_empty());
        self
    }

    /// Reads the bearer token from `RADSTRUCT_SCORER_TOKEN`.
    pub fn with_env_token(self) -> Self {
        let token = std::env::var(TOKEN_ENV).ok();
        self.with_token(token)
    }

    pub fn endpoint(&self) -> &str {
        &self.base
    }

    fn auth(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, TransportError> {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(auth) = self.auth() {
            req = req.header("Authorization", auth);
        }
        decode(req.call(), path)
    }
}

fn decode<T: DeserializeOwned>(
    result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    path: &str,
) -> Result<T, TransportError> {
    let mut response = result.map_err(|e| TransportError::Transient(format!("{path}: {e}")))?;
    let status = response.status().as_u16();
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| TransportError::Transient(format!("{path}: reading body: {e}")))?;
    match status {
        200..=299 => serde_json::from_str(&body).map_err(|e| TransportError::Protocol(format!("{path}: {e}"))),
        400 | 404 | 422 if body.to_ascii_lowercase().contains("unsupported") => {
            Err(TransportError::Unsupported(body))
        }
        408 | 429 | 500..=599 => Err(TransportError::Transient(format!("{path}: HTTP {status}"))),
        _ => Err(TransportError::Protocol(format!("{path}: HTTP {status}: {body}"))),
    }
}

impl Transport for HttpTransport {
    fn capabilities(&self) -> Result<Capabilities, TransportError> {
        self.get(METRICS_PATH)
    }

    fn health(&self) -> Result<Health, TransportError> {
        self.get(HEALTH_PATH)
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, TransportError> {
        let mut req = self.agent.post(format!("{}{SCORE_PATH}", self.base));
        if let Some(auth) = self.auth() {
            req = req.header("Authorization", auth);
        }
        decode(req.send_json(request), SCORE_PATH)
    }
}
