//! JSON wire types for the scoring service.
//!
//! `POST /v1/score` takes a [`ScoreRequest`] and answers with a
//! [`ScoreResponse`]; `GET /v1/metrics` returns [`Capabilities`];
//! `GET /v1/health` returns [`Health`]. Values are in `[0, 1]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lexical::LabelPrediction;

pub const SCORE_PATH: &str = "/v1/score";
pub const METRICS_PATH: &str = "/v1/metrics";
pub const HEALTH_PATH: &str = "/v1/health";

/// Environment variable holding the bearer token sent to the scorer.
pub const TOKEN_ENV: &str = "RADSTRUCT_SCORER_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub pair_id: String,
    pub hyp: String,
    #[serde(rename = "ref")]
    pub reference: String,
}

impl TextPair {
    pub fn new(pair_id: impl Into<String>, hyp: impl Into<String>, reference: impl Into<String>) -> Self {
        TextPair {
            pair_id: pair_id.into(),
            hyp: hyp.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub metric_id: String,
    pub pairs: Vec<TextPair>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, String>,
}

impl ScoreRequest {
    pub fn new(metric_id: impl Into<String>, pairs: Vec<TextPair>) -> Self {
        ScoreRequest {
            metric_id: metric_id.into(),
            pairs,
            options: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair_id: String,
    pub value: f64,
    /// Per-report disease labels of the hypothesis text; F1_SRR_BERT only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<LabelPrediction>>,
    /// Opaque scorer-specific breakdown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<BTreeMap<String, serde_json::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub metric_id: String,
    pub scores: Vec<PairScore>,
    pub scorer_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub metric_ids: Vec<String>,
    pub scorer_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexical::LabelStatus;

    #[test]
    fn field_names_on_the_wire() {
        let req = ScoreRequest::new("GREEN", vec![TextPair::new("p0", "a", "b")]);
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"metric_id": "GREEN", "pairs": [{"pair_id": "p0", "hyp": "a", "ref": "b"}]})
        );

        let resp = ScoreResponse {
            metric_id: "F1_SRR_BERT".into(),
            scores: vec![PairScore {
                pair_id: "p0".into(),
                value: 0.5,
                labels: Some(vec![LabelPrediction::new("Effusion", LabelStatus::Uncertain)]),
                detail: None,
            }],
            scorer_version: "x".into(),
        };
        let json = serde_json::to_value(&resp).unwrap();
        assert_eq!(json["scores"][0]["labels"][0]["label"], "Effusion");
        assert_eq!(json["scores"][0]["labels"][0]["status"], "Uncertain");
        assert_eq!(json["scores"][0]["value"], 0.5);
        let back: ScoreResponse = serde_json::from_value(json).unwrap();
        assert_eq!(back, resp);
    }
}
