//! Lexical metrics: tokenizer, sentence-level BLEU, ROUGE-L and the
//! (label, status) F1 used to aggregate disease-label classifications.
//!
//! All scores are in `[0, 1]`; percentages are a presentation concern.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Every metric the evaluation pipeline knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "BLEU")]
    Bleu,
    #[serde(rename = "ROUGE_L")]
    RougeL,
    #[serde(rename = "BERTScore")]
    BertScore,
    #[serde(rename = "F1_RadGraph")]
    F1RadGraph,
    #[serde(rename = "GREEN")]
    Green,
    #[serde(rename = "F1_SRR_BERT")]
    F1SrrBert,
}

impl MetricId {
    pub const ALL: [MetricId; 6] = [
        MetricId::Bleu,
        MetricId::RougeL,
        MetricId::BertScore,
        MetricId::F1RadGraph,
        MetricId::Green,
        MetricId::F1SrrBert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Bleu => "BLEU",
            MetricId::RougeL => "ROUGE_L",
            MetricId::BertScore => "BERTScore",
            MetricId::F1RadGraph => "F1_RadGraph",
            MetricId::Green => "GREEN",
            MetricId::F1SrrBert => "F1_SRR_BERT",
        }
    }

    /// Metrics computed in-process.
    pub fn is_native(self) -> bool {
        matches!(self, MetricId::Bleu | MetricId::RougeL)
    }

    /// Metrics that need an external scoring model.
    pub fn is_model_based(self) -> bool {
        !self.is_native()
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric id: {0}")]
pub struct UnknownMetric(pub String);

impl FromStr for MetricId {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim();
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(key) || m.as_str().replace('_', "-").eq_ignore_ascii_case(key))
            .ok_or_else(|| UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("{metric}: empty token sequence")]
    EmptySequence { metric: MetricId },
    #[error("BLEU order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("label '{0}' is not in the configured vocabulary")]
    UnknownLabel(String),
}

/// Optional per-metric breakdown attached to a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDetail {
    Bleu {
        precisions: Vec<f64>,
        brevity_penalty: f64,
        hyp_len: usize,
        ref_len: usize,
    },
    RougeL {
        lcs: usize,
        precision: f64,
        recall: f64,
    },
    LabelF1 {
        true_positives: usize,
        predicted: usize,
        reference: usize,
    },
    Scorer {
        version: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric_id: MetricId,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<ScoreDetail>,
}

impl MetricScore {
    pub fn new(metric_id: MetricId, value: f64) -> Self {
        MetricScore {
            metric_id,
            value,
            detail: None,
        }
    }
}

/// Lower-cased tokens produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn list_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:-\s+|\d+\.(?:\s+|$))").unwrap())
}

const SPLIT_PUNCT: [char; 8] = ['.', ',', ':', ';', '!', '?', '(', ')'];

/// Lower-cases, strips leading `- ` bullets and `<n>. ` numbering from each
/// line, and splits the punctuation marks `. , : ; ! ? ( )` into their own
/// tokens.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    for line in text.lines() {
        let line = list_marker_re().replace(line, "");
        for word in line.split_whitespace() {
            let word = word.to_lowercase();
            let mut current = String::new();
            for ch in word.chars() {
                if SPLIT_PUNCT.contains(&ch) {
                    if !current.is_empty() {
                        tokens.push(std::mem::take(&mut current));
                    }
                    tokens.push(ch.to_string());
                } else {
                    current.push(ch);
                }
            }
            if !current.is_empty() {
                tokens.push(current);
            }
        }
    }
    TokenSequence(tokens)
}

/// BLEU settings. Defaults: order 4, epsilon smoothing 1e-9 for n ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_n: usize,
    pub epsilon: f64,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_n: 4,
            epsilon: 1e-9,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level BLEU with uniform weights and clipped n-gram precision.
///
/// The effective order is `min(max_n, |hyp|, |ref|)`. A zero unigram match
/// gives exactly 0; zero matches at higher orders are replaced by `epsilon`.
pub fn bleu(hyp: &TokenSequence, reference: &TokenSequence, config: BleuConfig) -> Result<MetricScore, MetricError> {
    if config.max_n == 0 {
        return Err(MetricError::InvalidOrder(0));
    }
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptySequence { metric: MetricId::Bleu });
    }
    let order = config.max_n.min(hyp.len()).min(reference.len());
    let mut precisions = Vec::with_capacity(order);
    let mut log_sum = 0.0;
    for n in 1..=order {
        let hyp_counts = ngram_counts(hyp.tokens(), n);
        let ref_counts = ngram_counts(reference.tokens(), n);
        let matched: usize = hyp_counts
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let total = hyp.len() - n + 1;
        if matched == 0 && n == 1 {
            return Ok(MetricScore {
                metric_id: MetricId::Bleu,
                value: 0.0,
                detail: Some(ScoreDetail::Bleu {
                    precisions: vec![0.0],
                    brevity_penalty: brevity_penalty(hyp.len(), reference.len()),
                    hyp_len: hyp.len(),
                    ref_len: reference.len(),
                }),
            });
        }
        let numerator = if matched == 0 { config.epsilon } else { matched as f64 };
        let p = numerator / total as f64;
        precisions.push(p);
        log_sum += p.ln();
    }
    let bp = brevity_penalty(hyp.len(), reference.len());
    let value = (bp * (log_sum / order as f64).exp()).clamp(0.0, 1.0);
    Ok(MetricScore {
        metric_id: MetricId::Bleu,
        value,
        detail: Some(ScoreDetail::Bleu {
            precisions,
            brevity_penalty: bp,
            hyp_len: hyp.len(),
            ref_len: reference.len(),
        }),
    })
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    }
}

/// Length of the longest common subsequence, O(|a|·|b|) time and O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                curr[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure. `beta = 1` gives the harmonic mean of LCS precision
/// and recall.
pub fn rouge_l(hyp: &TokenSequence, reference: &TokenSequence, beta: f64) -> Result<MetricScore, MetricError> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptySequence { metric: MetricId::RougeL });
    }
    let lcs = lcs_len(hyp.tokens(), reference.tokens());
    let precision = lcs as f64 / hyp.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    let value = if lcs == 0 {
        0.0
    } else {
        let b2 = beta * beta;
        (1.0 + b2) * precision * recall / (recall + b2 * precision)
    };
    Ok(MetricScore {
        metric_id: MetricId::RougeL,
        value,
        detail: Some(ScoreDetail::RougeL { lcs, precision, recall }),
    })
}

/// Status of a disease label in one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelStatus {
    Present,
    Absent,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelPrediction {
    pub label: String,
    pub status: LabelStatus,
}

impl LabelPrediction {
    pub fn new(label: impl Into<String>, status: LabelStatus) -> Self {
        LabelPrediction {
            label: label.into(),
            status,
        }
    }
}

/// Closed set of disease labels a classifier may emit.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelVocabulary {
    labels: BTreeSet<String>,
}

impl LabelVocabulary {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        LabelVocabulary {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }

    /// One label per non-empty line; `#` starts a comment.
    pub fn from_lines(text: &str) -> Self {
        LabelVocabulary::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Averaging {
    /// One F1 over all (label, status) pairs.
    #[default]
    Micro,
    /// Mean of per-label F1 over labels mentioned by either side.
    Macro,
}

fn f1_from_counts(tp: usize, predicted: usize, reference: usize) -> f64 {
    match (predicted, reference) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ if tp == 0 => 0.0,
        _ => {
            let p = tp as f64 / predicted as f64;
            let r = tp as f64 / reference as f64;
            2.0 * p * r / (p + r)
        }
    }
}

/// F1 between predicted and reference (label, status) sets.
///
/// `vocabulary = None` skips the membership check.
pub fn compute_label_f1(
    pred: &BTreeSet<LabelPrediction>,
    reference: &BTreeSet<LabelPrediction>,
    vocabulary: Option<&LabelVocabulary>,
    averaging: F1Averaging,
) -> Result<MetricScore, MetricError> {
    if let Some(vocab) = vocabulary {
        if let Some(bad) = pred.iter().chain(reference).find(|p| !vocab.contains(&p.label)) {
            return Err(MetricError::UnknownLabel(bad.label.clone()));
        }
    }
    let tp = pred.intersection(reference).count();
    let value = match averaging {
        F1Averaging::Micro => f1_from_counts(tp, pred.len(), reference.len()),
        F1Averaging::Macro => {
            let mut per_label: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
            for p in pred {
                let e = per_label.entry(&p.label).or_default();
                e.1 += 1;
                if reference.contains(p) {
                    e.0 += 1;
                }
            }
            for r in reference {
                per_label.entry(&r.label).or_default().2 += 1;
            }
            if per_label.is_empty() {
                1.0
            } else {
                per_label
                    .values()
                    .map(|&(t, p, r)| f1_from_counts(t, p, r))
                    .sum::<f64>()
                    / per_label.len() as f64
            }
        }
    };
    Ok(MetricScore {
        metric_id: MetricId::F1SrrBert,
        value,
        detail: Some(ScoreDetail::LabelF1 {
            true_positives: tp,
            predicted: pred.len(),
            reference: reference.len(),
        }),
    })
}
