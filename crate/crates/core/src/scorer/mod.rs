//! Gateway to model-based metrics (BERTScore, F1-RadGraph, GREEN,
//! F1-SRR-BERT) served outside this process.

pub mod client;
pub mod http;
pub mod mock;
pub mod protocol;

pub use client::{validate_response, ClientConfig, GatewayError, ScorerClient, Transport, TransportError};
pub use http::HttpTransport;
pub use mock::{mock_score, FaultPlan, MockScorer};
pub use protocol::{Capabilities, Health, PairScore, ScoreRequest, ScoreResponse, TextPair};
