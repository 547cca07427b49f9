//! Deterministic in-process stand-in for the scoring service.
//!
//! Every model-based metric is approximated by ROUGE-L over the tokenized
//! texts. For F1_SRR_BERT a ten-entry keyword lexicon assigns disease labels
//! to the hypothesis text. Faults can be injected to exercise the client's
//! retry and validation paths.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::client::{Transport, TransportError};
use super::protocol::{Capabilities, Health, PairScore, ScoreRequest, ScoreResponse, TextPair};
use crate::lexical::{rouge_l, tokenize, LabelPrediction, LabelStatus, LabelVocabulary, MetricId};

pub const MOCK_VERSION: &str = "radstruct-mock/1";

/// Keyword → label lexicon used by the mock classifier.
pub const MOCK_LEXICON: [(&str, &str); 10] = [
    ("effusion", "Pleural Effusion"),
    ("pneumothorax", "Pneumothorax"),
    ("consolidation", "Consolidation"),
    ("edema", "Pulmonary Edema"),
    ("atelectasis", "Atelectasis"),
    ("cardiomegaly", "Cardiomegaly"),
    ("nodule", "Lung Nodule"),
    ("fracture", "Fracture"),
    ("pneumonia", "Pneumonia"),
    ("tube", "Support Device"),
];

pub fn mock_vocabulary() -> LabelVocabulary {
    LabelVocabulary::new(MOCK_LEXICON.iter().map(|(_, label)| *label))
}

const NEGATION_CUES: [&str; 3] = ["no", "without", "negative"];
const UNCERTAINTY_CUES: [&str; 5] = ["possible", "possibly", "may", "likely", "questionable"];

/// Keyword labels of `text`. The first mention of a label decides its status.
pub fn mock_labels(text: &str) -> Vec<LabelPrediction> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for sentence in text.split(['.', ';', '\n']) {
        let words: Vec<String> = sentence
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        for (pos, word) in words.iter().enumerate() {
            let Some((_, label)) = MOCK_LEXICON.iter().find(|(kw, _)| word.starts_with(kw)) else {
                continue;
            };
            if !seen.insert(*label) {
                continue;
            }
            let before = &words[..pos];
            let status = if before.iter().any(|w| NEGATION_CUES.contains(&w.as_str())) {
                LabelStatus::Absent
            } else if before.iter().any(|w| UNCERTAINTY_CUES.contains(&w.as_str())) {
                LabelStatus::Uncertain
            } else {
                LabelStatus::Present
            };
            out.push(LabelPrediction::new(*label, status));
        }
    }
    out
}

/// Deterministic score of one pair.
pub fn mock_score(metric: MetricId, pair: &TextPair) -> PairScore {
    let hyp = tokenize(&pair.hyp);
    let reference = tokenize(&pair.reference);
    let value = match (hyp.is_empty(), reference.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => rouge_l(&hyp, &reference, 1.0).map(|s| s.value).unwrap_or(0.0),
    };
    PairScore {
        pair_id: pair.pair_id.clone(),
        value,
        labels: (metric == MetricId::F1SrrBert).then(|| mock_labels(&pair.hyp)),
        detail: None,
    }
}

/// Faults applied to `score` calls, indexed from 0 in arrival order.
#[derive(Debug, Clone, Default)]
pub struct FaultPlan {
    /// The first `n` calls fail with a transient error.
    pub transient_first: usize,
    /// Specific calls that fail with a transient error.
    pub transient_calls: HashSet<usize>,
    /// Drop the last score of every response.
    pub truncate: bool,
    /// Rename the first pair_id of every response.
    pub wrong_pair_id: bool,
}

#[derive(Debug)]
pub struct MockScorer {
    metrics: Vec<MetricId>,
    faults: FaultPlan,
    calls: AtomicUsize,
    batch_sizes: Mutex<Vec<usize>>,
}

impl Default for MockScorer {
    fn default() -> Self {
        MockScorer::new()
    }
}

impl MockScorer {
    /// Advertises the four model-based metrics.
    pub fn new() -> Self {
        MockScorer {
            metrics: MetricId::ALL.into_iter().filter(|m| m.is_model_based()).collect(),
            faults: FaultPlan::default(),
            calls: AtomicUsize::new(0),
            batch_sizes: Mutex::new(Vec::new()),
        }
    }

    pub fn with_faults(mut self, faults: FaultPlan) -> Self {
        self.faults = faults;
        self
    }

    pub fn with_metrics(mut self, metrics: impl IntoIterator<Item = MetricId>) -> Self {
        self.metrics = metrics.into_iter().collect();
        self
    }

    /// Number of `score` calls received, failed ones included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Pair counts of successfully answered calls, in completion order.
    pub fn batch_sizes(&self) -> Vec<usize> {
        self.batch_sizes.lock().map(|v| v.clone()).unwrap_or_default()
    }

    /// Handles a request without fault injection or call accounting.
    pub fn respond(&self, request: &ScoreRequest) -> Result<ScoreResponse, TransportError> {
        let metric = self
            .metrics
            .iter()
            .copied()
            .find(|m| m.as_str() == request.metric_id)
            .ok_or_else(|| TransportError::Unsupported(request.metric_id.clone()))?;
        Ok(ScoreResponse {
            metric_id: request.metric_id.clone(),
            scores: request.pairs.iter().map(|p| mock_score(metric, p)).collect(),
            scorer_version: MOCK_VERSION.to_string(),
        })
    }

    pub fn capabilities_listing(&self) -> Capabilities {
        Capabilities {
            metric_ids: self.metrics.iter().map(|m| m.as_str().to_string()).collect(),
            scorer_version: MOCK_VERSION.to_string(),
        }
    }
}

impl Transport for MockScorer {
    fn capabilities(&self) -> Result<Capabilities, TransportError> {
        Ok(self.capabilities_listing())
    }

    fn health(&self) -> Result<Health, TransportError> {
        Ok(Health {
            status: "ok".into(),
            version: MOCK_VERSION.into(),
        })
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, TransportError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        if call < self.faults.transient_first || self.faults.transient_calls.contains(&call) {
            return Err(TransportError::Transient(format!("injected failure on call {call}")));
        }
        let mut response = self.respond(request)?;
        if self.faults.truncate {
            response.scores.pop();
        }
        if self.faults.wrong_pair_id {
            if let Some(first) = response.scores.first_mut() {
                first.pair_id.push_str("-bogus");
            }
        }
        if let Ok(mut sizes) = self.batch_sizes.lock() {
            sizes.push(request.pairs.len());
        }
        Ok(response)
    }
}

/// Groups mock labels by pair for quick inspection in examples and tests.
pub fn labels_by_pair(response: &ScoreResponse) -> BTreeMap<&str, &[LabelPrediction]> {
    response
        .scores
        .iter()
        .filter_map(|s| s.labels.as_deref().map(|l| (s.pair_id.as_str(), l)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_disjoint_and_determinism() {
        let same = TextPair::new("a", "Small left effusion.", "Small left effusion.");
        let disjoint = TextPair::new("b", "aaa bbb", "ccc ddd");
        assert_eq!(mock_score(MetricId::Green, &same).value, 1.0);
        assert_eq!(mock_score(MetricId::Green, &disjoint).value, 0.0);
        let p = TextPair::new("c", "no acute process", "no acute cardiopulmonary process");
        assert_eq!(mock_score(MetricId::BertScore, &p), mock_score(MetricId::BertScore, &p));
    }

    #[test]
    fn lexicon_labels() {
        let labels = mock_labels("No pneumothorax. Possible left lower lobe pneumonia. Small effusion.");
        assert_eq!(
            labels,
            vec![
                LabelPrediction::new("Pneumothorax", LabelStatus::Absent),
                LabelPrediction::new("Pneumonia", LabelStatus::Uncertain),
                LabelPrediction::new("Pleural Effusion", LabelStatus::Present),
            ]
        );
        assert_eq!(mock_vocabulary().len(), 10);
        assert!(mock_score(MetricId::Green, &TextPair::new("x", "effusion", "")).labels.is_none());
    }

    #[test]
    fn unsupported_metric() {
        let mock = MockScorer::new();
        let req = ScoreRequest::new("FOO", vec![TextPair::new("a", "x", "y")]);
        assert!(matches!(mock.score(&req), Err(TransportError::Unsupported(_))));
    }
}
