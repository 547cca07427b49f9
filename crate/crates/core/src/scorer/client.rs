//! Batching, retrying client for the scoring protocol.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{Capabilities, Health, PairScore, ScoreRequest, ScoreResponse};
use crate::lexical::MetricId;

/// Failure reported by a [`Transport`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Connect failure, timeout or server-side error; worth retrying.
    #[error("transient transport failure: {0}")]
    Transient(String),
    #[error("metric not supported by scorer: {0}")]
    Unsupported(String),
    #[error("malformed response: {0}")]
    Protocol(String),
}

/// One hop to a scorer. Implemented over HTTP and by the in-process mock.
pub trait Transport: Send + Sync {
    fn capabilities(&self) -> Result<Capabilities, TransportError>;
    fn health(&self) -> Result<Health, TransportError>;
    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("scorer unavailable after {attempts} attempt(s): {reason}")]
    ScorerUnavailable { attempts: usize, reason: String },
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    /// Largest number of pairs sent in one wire call.
    pub max_batch: usize,
    /// Retries after the first attempt of a wire call.
    pub max_retries: usize,
    /// Delay before the first retry; doubles for each further retry.
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    /// Wire calls allowed in flight at once for one client.
    pub max_in_flight: usize,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            max_batch: 32,
            max_retries: 3,
            backoff_base: Duration::from_millis(200),
            max_in_flight: 4,
            timeout: Duration::from_secs(120),
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Counting semaphore bounding concurrent wire calls across threads.
struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: std::sync::Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        InFlight {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: std::sync::Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

pub struct ScorerClient {
    transport: Box<dyn Transport>,
    config: ClientConfig,
    capabilities: OnceLock<Capabilities>,
    in_flight: InFlight,
    wire_calls: AtomicUsize,
}

impl std::fmt::Debug for ScorerClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScorerClient").field("config", &self.config).finish_non_exhaustive()
    }
}

impl ScorerClient {
    pub fn new(transport: impl Transport + 'static, config: ClientConfig) -> Self {
        let in_flight = InFlight::new(config.max_in_flight);
        ScorerClient {
            transport: Box::new(transport),
            config,
            capabilities: OnceLock::new(),
            in_flight,
            wire_calls: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// `POST /v1/score` calls issued so far, retries included.
    pub fn wire_calls(&self) -> usize {
        self.wire_calls.load(Ordering::SeqCst)
    }

    pub fn health(&self) -> Result<Health, GatewayError> {
        self.with_retries(|| self.transport.health())
    }

    /// Capabilities are fetched once and cached.
    pub fn capabilities(&self) -> Result<&Capabilities, GatewayError> {
        if let Some(c) = self.capabilities.get() {
            return Ok(c);
        }
        let fetched = self.with_retries(|| self.transport.capabilities())?;
        Ok(self.capabilities.get_or_init(|| fetched))
    }

    pub fn supports(&self, metric_id: &str) -> Result<bool, GatewayError> {
        Ok(self.capabilities()?.metric_ids.iter().any(|m| m == metric_id))
    }

    /// Scores every pair of `request`, splitting it into wire calls of at
    /// most `max_batch` pairs. The response lists scores in request order.
    pub fn score_batch(&self, request: &ScoreRequest) -> Result<ScoreResponse, GatewayError> {
        if request.pairs.is_empty() {
            return Err(GatewayError::InvalidRequest("request has no pairs".into()));
        }
        let mut ids = HashSet::with_capacity(request.pairs.len());
        for pair in &request.pairs {
            if !ids.insert(pair.pair_id.as_str()) {
                return Err(GatewayError::InvalidRequest(format!("duplicate pair_id '{}'", pair.pair_id)));
            }
        }
        if !self.supports(&request.metric_id)? {
            return Err(GatewayError::UnsupportedMetric(request.metric_id.clone()));
        }

        let chunks: Vec<ScoreRequest> = request
            .pairs
            .chunks(self.config.max_batch.max(1))
            .map(|pairs| ScoreRequest {
                metric_id: request.metric_id.clone(),
                pairs: pairs.to_vec(),
                options: request.options.clone(),
            })
            .collect();

        let responses: Vec<Result<ScoreResponse, GatewayError>> = if chunks.len() == 1 {
            vec![self.call_chunk(&chunks[0])]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .iter()
                    .map(|chunk| scope.spawn(move || self.call_chunk(chunk)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(GatewayError::ProtocolError("worker panicked".into()))))
                    .collect()
            })
        };

        let mut by_id: HashMap<String, PairScore> = HashMap::with_capacity(request.pairs.len());
        let mut version = None;
        for response in responses {
            let response = response?;
            version.get_or_insert(response.scorer_version);
            for score in response.scores {
                by_id.insert(score.pair_id.clone(), score);
            }
        }
        let scores = request
            .pairs
            .iter()
            .map(|p| {
                by_id
                    .remove(&p.pair_id)
                    .ok_or_else(|| GatewayError::ProtocolError(format!("missing score for pair_id '{}'", p.pair_id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScoreResponse {
            metric_id: request.metric_id.clone(),
            scores,
            scorer_version: version.unwrap_or_default(),
        })
    }

    fn call_chunk(&self, chunk: &ScoreRequest) -> Result<ScoreResponse, GatewayError> {
        let response = self.with_retries(|| {
            let _slot = self.in_flight.acquire();
            self.wire_calls.fetch_add(1, Ordering::SeqCst);
            self.transport.score(chunk)
        })?;
        validate_response(chunk, &response)?;
        Ok(response)
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, TransportError>) -> Result<T, GatewayError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match call() {
                Ok(v) => return Ok(v),
                Err(TransportError::Transient(reason)) => {
                    if attempt > self.config.max_retries {
                        return Err(GatewayError::ScorerUnavailable {
                            attempts: attempt,
                            reason,
                        });
                    }
                    let factor = 1u32 << (attempt - 1).min(16);
                    let delay = self.config.backoff_base.saturating_mul(factor);
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                }
                Err(TransportError::Unsupported(m)) => return Err(GatewayError::UnsupportedMetric(m)),
                Err(TransportError::Protocol(m)) => return Err(GatewayError::ProtocolError(m)),
            }
        }
    }
}

/// Rejects partial or malformed responses for one wire call.
pub fn validate_response(request: &ScoreRequest, response: &ScoreResponse) -> Result<(), GatewayError> {
    if response.metric_id != request.metric_id {
        return Err(GatewayError::ProtocolError(format!(
            "response metric '{}' does not match request '{}'",
            response.metric_id, request.metric_id
        )));
    }
    if response.scores.len() != request.pairs.len() {
        return Err(GatewayError::ProtocolError(format!(
            "expected {} scores, received {}",
            request.pairs.len(),
            response.scores.len()
        )));
    }
    let wanted: HashSet<&str> = request.pairs.iter().map(|p| p.pair_id.as_str()).collect();
    let mut seen = HashSet::with_capacity(wanted.len());
    let carries_labels = request.metric_id == MetricId::F1SrrBert.as_str();
    for score in &response.scores {
        if !wanted.contains(score.pair_id.as_str()) || !seen.insert(score.pair_id.as_str()) {
            return Err(GatewayError::ProtocolError(format!("unexpected pair_id '{}'", score.pair_id)));
        }
        if !score.value.is_finite() || !(0.0..=1.0).contains(&score.value) {
            return Err(GatewayError::ProtocolError(format!(
                "value {} for '{}' is outside [0, 1]",
                score.value, score.pair_id
            )));
        }
        if score.labels.is_some() && !carries_labels {
            return Err(GatewayError::ProtocolError(format!(
                "labels are only valid for {}",
                MetricId::F1SrrBert
            )));
        }
    }
    Ok(())
}
