//! Section-wise evaluation of generated reports.
//!
//! Findings are scored per organ system and averaged; systems present on
//! only one side, and hypothesis headers outside the template vocabulary,
//! contribute zero. Impression is scored once over the item texts with the
//! numbering removed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::adherence::{check_adherence, numbering_violations, renamed_systems, AdherenceError, AdherenceReport, NegativeFindingPatterns};
use crate::lexical::{
    bleu, compute_label_f1, rouge_l, tokenize, BleuConfig, F1Averaging, LabelPrediction, LabelVocabulary, MetricId,
    MetricScore, ScoreDetail,
};
use crate::report::{parse_structured_report, ParseError, StructuredReport};
use crate::scorer::{GatewayError, ScoreRequest, ScorerClient, TextPair};
use crate::template::{HeaderMatch, TemplateSpec};

/// Source dataset of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "MIMIC", alias = "mimic", alias = "MIMIC-CXR")]
    Mimic,
    #[serde(rename = "CheXpert", alias = "chexpert", alias = "CheXpert Plus")]
    CheXpert,
    #[default]
    Other,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Mimic, Dataset::CheXpert, Dataset::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Mimic => "MIMIC",
            Dataset::CheXpert => "CheXpert",
            Dataset::Other => "Other",
        }
    }

    fn suffix(self) -> char {
        match self {
            Dataset::Mimic => 'M',
            Dataset::CheXpert => 'C',
            Dataset::Other => 'O',
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mimic" | "mimic-cxr" => Ok(Dataset::Mimic),
            "chexpert" | "chexpert plus" | "chexpert-plus" => Ok(Dataset::CheXpert),
            "other" => Ok(Dataset::Other),
            _ => Err(format!("unknown dataset '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalSection {
    Findings,
    Impression,
}

impl EvalSection {
    pub const ALL: [EvalSection; 2] = [EvalSection::Findings, EvalSection::Impression];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalSection::Findings => "Findings",
            EvalSection::Impression => "Impression",
        }
    }

    /// Short group label such as `F_M` or `I_C`.
    pub fn group_label(self, dataset: Dataset) -> String {
        let prefix = match self {
            EvalSection::Findings => 'F',
            EvalSection::Impression => 'I',
        };
        format!("{prefix}_{}", dataset.suffix())
    }
}

impl fmt::Display for EvalSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which organ systems the Findings average runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingMode {
    /// Systems of either report plus unrecognized hypothesis headers.
    #[default]
    Union,
    /// Systems of the reference only.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionFlag {
    EmptyFindings,
    EmptyImpression,
    NumberingInconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionScore {
    pub section: EvalSection,
    /// Findings only; keyed by canonical header or `unrecognized:<raw>`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_system: BTreeMap<String, MetricScore>,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub penalized_systems: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<SectionFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub sample_id: String,
    pub dataset: Dataset,
    pub findings: BTreeMap<MetricId, SectionScore>,
    pub impression: BTreeMap<MetricId, SectionScore>,
    pub adherence: AdherenceReport,
}

impl EvaluationResult {
    pub fn section(&self, section: EvalSection) -> &BTreeMap<MetricId, SectionScore> {
        match section {
            EvalSection::Findings => &self.findings,
            EvalSection::Impression => &self.impression,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{metric} failed on {section}{}: {message}", system.as_ref().map(|s| format!(" / {s}")).unwrap_or_default())]
    MetricFailure {
        metric: MetricId,
        section: EvalSection,
        system: Option<String>,
        message: String,
    },
    #[error("{0} needs a scorer endpoint but none is configured")]
    ScorerUnavailable(MetricId),
    #[error("sample {sample_id}: {side} report: {source}")]
    Parse {
        sample_id: String,
        side: &'static str,
        source: ParseError,
    },
    #[error(transparent)]
    Adherence(#[from] AdherenceError),
    #[error("cannot aggregate an empty list of results")]
    EmptyList,
}

/// Failure of one metric call, optionally tied to the pair that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFailure {
    pub index: Option<usize>,
    pub message: String,
}

/// A text-pair metric. Pairs are (hypothesis, reference) and never both
/// empty; implementations may batch them.
pub trait TextMetric: Sync {
    fn id(&self) -> MetricId;
    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<MetricScore>, PairFailure>;
}

/// BLEU or ROUGE-L computed in-process.
#[derive(Debug, Clone, Copy)]
pub struct NativeMetric {
    pub id: MetricId,
    pub bleu: BleuConfig,
    pub rouge_beta: f64,
}

impl NativeMetric {
    pub fn bleu() -> Self {
        NativeMetric {
            id: MetricId::Bleu,
            bleu: BleuConfig::default(),
            rouge_beta: 1.0,
        }
    }

    pub fn rouge_l() -> Self {
        NativeMetric {
            id: MetricId::RougeL,
            ..NativeMetric::bleu()
        }
    }

    fn score_one(&self, hyp: &str, reference: &str) -> Result<MetricScore, String> {
        let h = tokenize(hyp);
        let r = tokenize(reference);
        if h.is_empty() || r.is_empty() {
            let value = if h.is_empty() && r.is_empty() { 1.0 } else { 0.0 };
            return Ok(MetricScore::new(self.id, value));
        }
        let result = match self.id {
            MetricId::Bleu => bleu(&h, &r, self.bleu),
            MetricId::RougeL => rouge_l(&h, &r, self.rouge_beta),
            other => return Err(format!("{other} is not a native metric")),
        };
        result.map_err(|e| e.to_string())
    }
}

impl TextMetric for NativeMetric {
    fn id(&self) -> MetricId {
        self.id
    }

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<MetricScore>, PairFailure> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, (h, r))| {
                self.score_one(h, r).map_err(|message| PairFailure {
                    index: Some(i),
                    message,
                })
            })
            .collect()
    }
}

/// Model-based metric delegated to a scorer.
///
/// For F1_SRR_BERT each reference text is also sent as its own
/// hypothesis so that both sides get labels; the F1 is then computed
/// locally from the two label sets.
pub struct GatewayMetric<'a> {
    pub id: MetricId,
    pub client: &'a ScorerClient,
    pub options: BTreeMap<String, String>,
    pub vocabulary: Option<&'a LabelVocabulary>,
    pub averaging: F1Averaging,
}

impl TextMetric for GatewayMetric<'_> {
    fn id(&self) -> MetricId {
        self.id
    }

    fn score_pairs(&self, pairs: &[(String, String)]) -> Result<Vec<MetricScore>, PairFailure> {
        let labels_wanted = self.id == MetricId::F1SrrBert;
        let mut wire = Vec::with_capacity(pairs.len() * if labels_wanted { 2 } else { 1 });
        for (i, (h, r)) in pairs.iter().enumerate() {
            wire.push(TextPair::new(format!("p{i}"), h.clone(), r.clone()));
            if labels_wanted {
                wire.push(TextPair::new(format!("p{i}/ref"), r.clone(), r.clone()));
            }
        }
        let mut request = ScoreRequest::new(self.id.as_str(), wire);
        request.options = self.options.clone();
        let response = self.client.score_batch(&request).map_err(|e: GatewayError| PairFailure {
            index: None,
            message: e.to_string(),
        })?;

        let stride = if labels_wanted { 2 } else { 1 };
        let mut out = Vec::with_capacity(pairs.len());
        for (i, chunk) in response.scores.chunks(stride).enumerate() {
            let primary = &chunk[0];
            let label_sets = match (labels_wanted, &primary.labels, chunk.get(1).and_then(|s| s.labels.as_ref())) {
                (true, Some(h), Some(r)) => Some((h, r)),
                _ => None,
            };
            let score = match label_sets {
                Some((h, r)) => {
                    let h: BTreeSet<LabelPrediction> = h.iter().cloned().collect();
                    let r: BTreeSet<LabelPrediction> = r.iter().cloned().collect();
                    compute_label_f1(&h, &r, self.vocabulary, self.averaging).map_err(|e| PairFailure {
                        index: Some(i),
                        message: e.to_string(),
                    })?
                }
                None => MetricScore {
                    metric_id: self.id,
                    value: primary.value,
                    detail: Some(ScoreDetail::Scorer {
                        version: response.scorer_version.clone(),
                    }),
                },
            };
            out.push(score);
        }
        Ok(out)
    }
}

const UNRECOGNIZED_PREFIX: &str = "unrecognized:";

fn metric_failure(metric: MetricId, section: EvalSection, system: Option<String>, f: PairFailure) -> EvalError {
    EvalError::MetricFailure {
        metric,
        section,
        system,
        message: f.message,
    }
}

/// Scores one pair texts with `metric`, short-circuiting empty sides.
fn score_texts(
    metric: &dyn TextMetric,
    section: EvalSection,
    keys: &[String],
    texts: Vec<(String, String)>,
) -> Result<Vec<MetricScore>, EvalError> {
    let mut results: Vec<Option<MetricScore>> = vec![None; texts.len()];
    let mut to_send = Vec::new();
    let mut positions = Vec::new();
    for (i, (h, r)) in texts.into_iter().enumerate() {
        match (h.trim().is_empty(), r.trim().is_empty()) {
            (true, true) => results[i] = Some(MetricScore::new(metric.id(), 1.0)),
            (true, false) | (false, true) => results[i] = Some(MetricScore::new(metric.id(), 0.0)),
            _ => {
                positions.push(i);
                to_send.push((h, r));
            }
        }
    }
    if !to_send.is_empty() {
        let scored = metric.score_pairs(&to_send).map_err(|f| {
            let system = f.index.and_then(|i| positions.get(i)).and_then(|&p| keys.get(p)).cloned();
            metric_failure(metric.id(), section, system, f)
        })?;
        if scored.len() != positions.len() {
            return Err(EvalError::MetricFailure {
                metric: metric.id(),
                section,
                system: None,
                message: format!("expected {} scores, got {}", positions.len(), scored.len()),
            });
        }
        for (pos, score) in positions.into_iter().zip(scored) {
            results[pos] = Some(score);
        }
    }
    Ok(results.into_iter().map(|s| s.expect("every pair scored")).collect())
}

/// Per-organ-system Findings score.
///
/// Under union averaging the universe holds the canonical systems of both
/// reports plus one `unrecognized:<raw>` entry per hypothesis header outside
/// the vocabulary. A header that stands in for a reference-only system (see
/// [`renamed_systems`]) is folded into that system instead of adding an
/// entry. Systems not scored on both sides contribute 0.
pub fn score_findings(
    hyp: &StructuredReport,
    reference: &StructuredReport,
    metric: &dyn TextMetric,
    averaging: AveragingMode,
) -> Result<SectionScore, EvalError> {
    let hyp_systems: BTreeMap<&str, String> = hyp.recognized_systems().map(|(c, s)| (c, s.joined_text())).collect();
    let ref_systems: BTreeMap<&str, String> =
        reference.recognized_systems().map(|(c, s)| (c, s.joined_text())).collect();

    let mut universe: BTreeSet<String> = BTreeSet::new();
    match averaging {
        AveragingMode::Union => {
            universe.extend(hyp_systems.keys().map(|s| s.to_string()));
            universe.extend(ref_systems.keys().map(|s| s.to_string()));
            let claimed: BTreeMap<usize, &str> = renamed_systems(hyp, reference).into_iter().collect();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for (i, organ) in hyp.findings.iter().enumerate() {
                if organ.header_match != HeaderMatch::Unrecognized || claimed.contains_key(&i) {
                    continue;
                }
                let n = counts.entry(organ.header_raw.as_str()).or_insert(0);
                *n += 1;
                let key = if *n == 1 {
                    format!("{UNRECOGNIZED_PREFIX}{}", organ.header_raw)
                } else {
                    format!("{UNRECOGNIZED_PREFIX}{}#{n}", organ.header_raw)
                };
                universe.insert(key);
            }
        }
        AveragingMode::Reference => universe.extend(ref_systems.keys().map(|s| s.to_string())),
    }

    let mut shared_keys = Vec::new();
    let mut shared_texts = Vec::new();
    let mut per_system = BTreeMap::new();
    let mut penalized = Vec::new();
    for key in &universe {
        match (hyp_systems.get(key.as_str()), ref_systems.get(key.as_str())) {
            (Some(h), Some(r)) => {
                shared_keys.push(key.clone());
                shared_texts.push((h.clone(), r.clone()));
            }
            _ => {
                per_system.insert(key.clone(), MetricScore::new(metric.id(), 0.0));
                penalized.push(key.clone());
            }
        }
    }
    let scored = score_texts(metric, EvalSection::Findings, &shared_keys, shared_texts)?;
    for (key, score) in shared_keys.into_iter().zip(scored) {
        per_system.insert(key, score);
    }

    let mut flags = Vec::new();
    let value = if per_system.is_empty() {
        flags.push(SectionFlag::EmptyFindings);
        0.0
    } else {
        per_system.values().map(|s| s.value).sum::<f64>() / per_system.len() as f64
    };
    Ok(SectionScore {
        section: EvalSection::Findings,
        per_system,
        value,
        penalized_systems: penalized,
        flags,
    })
}

/// Impression score over the numbering-stripped, space-joined item texts.
pub fn score_impression(
    hyp: &StructuredReport,
    reference: &StructuredReport,
    metric: &dyn TextMetric,
) -> Result<SectionScore, EvalError> {
    let hyp_text = hyp.impression_text();
    let ref_text = reference.impression_text();
    let mut flags = Vec::new();
    if !numbering_violations(&hyp.impression).is_empty() {
        flags.push(SectionFlag::NumberingInconsistent);
    }
    let value = if hyp_text.is_empty() || ref_text.is_empty() {
        flags.insert(0, SectionFlag::EmptyImpression);
        0.0
    } else {
        score_texts(metric, EvalSection::Impression, &[], vec![(hyp_text, ref_text)])?[0].value
    };
    Ok(SectionScore {
        section: EvalSection::Impression,
        per_system: BTreeMap::new(),
        value,
        penalized_systems: Vec::new(),
        flags,
    })
}

/// Settings shared by every sample of a run.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub spec: TemplateSpec,
    pub averaging: AveragingMode,
    pub bleu: BleuConfig,
    pub rouge_beta: f64,
    pub label_f1: F1Averaging,
    pub label_vocabulary: Option<LabelVocabulary>,
    pub negatives: NegativeFindingPatterns,
    pub scorer_options: BTreeMap<String, String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            spec: TemplateSpec::chest_xray(),
            averaging: AveragingMode::Union,
            bleu: BleuConfig::default(),
            rouge_beta: 1.0,
            label_f1: F1Averaging::Micro,
            label_vocabulary: None,
            negatives: NegativeFindingPatterns::default(),
            scorer_options: BTreeMap::new(),
        }
    }
}

/// Hypothesis and reference texts of one sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleInput<'a> {
    pub sample_id: &'a str,
    pub dataset: Dataset,
    pub hypothesis: &'a str,
    pub reference: &'a str,
}

/// Runs the full per-sample protocol.
pub struct Evaluator<'a> {
    config: &'a EvalConfig,
    scorer: Option<&'a ScorerClient>,
}

impl<'a> Evaluator<'a> {
    pub fn new(config: &'a EvalConfig, scorer: Option<&'a ScorerClient>) -> Self {
        Evaluator { config, scorer }
    }

    pub fn config(&self) -> &EvalConfig {
        self.config
    }

    /// Fails fast when a model-based metric has no scorer.
    pub fn check_metrics(&self, metrics: &[MetricId]) -> Result<(), EvalError> {
        match metrics.iter().find(|m| m.is_model_based()) {
            Some(&m) if self.scorer.is_none() => Err(EvalError::ScorerUnavailable(m)),
            _ => Ok(()),
        }
    }

    fn metric(&self, id: MetricId) -> Result<Box<dyn TextMetric + 'a>, EvalError> {
        if id.is_native() {
            return Ok(Box::new(NativeMetric {
                id,
                bleu: self.config.bleu,
                rouge_beta: self.config.rouge_beta,
            }));
        }
        let client = self.scorer.ok_or(EvalError::ScorerUnavailable(id))?;
        Ok(Box::new(GatewayMetric {
            id,
            client,
            options: self.config.scorer_options.clone(),
            vocabulary: self.config.label_vocabulary.as_ref(),
            averaging: self.config.label_f1,
        }))
    }

    pub fn evaluate_sample(&self, input: SampleInput<'_>, metrics: &[MetricId]) -> Result<EvaluationResult, EvalError> {
        self.check_metrics(metrics)?;
        let spec = &self.config.spec;
        let parse = |text: &str, side: &'static str| {
            parse_structured_report(text, spec)
                .map(|r| r.with_provenance(input.sample_id))
                .map_err(|source| EvalError::Parse {
                    sample_id: input.sample_id.to_string(),
                    side,
                    source,
                })
        };
        let hyp = parse(input.hypothesis, "hypothesis")?;
        let reference = parse(input.reference, "reference")?;

        let mut findings = BTreeMap::new();
        let mut impression = BTreeMap::new();
        for &id in metrics {
            let metric = self.metric(id)?;
            findings.insert(id, score_findings(&hyp, &reference, metric.as_ref(), self.config.averaging)?);
            impression.insert(id, score_impression(&hyp, &reference, metric.as_ref())?);
        }
        let adherence = check_adherence(&hyp, Some(&reference), spec, &self.config.negatives)?;
        Ok(EvaluationResult {
            sample_id: input.sample_id.to_string(),
            dataset: input.dataset,
            findings,
            impression,
            adherence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// `None` for rows pooled over every dataset.
    pub dataset: Option<Dataset>,
    pub section: EvalSection,
    pub metric: MetricId,
    pub samples: usize,
    pub mean: f64,
}

impl SummaryRow {
    pub fn group_label(&self) -> String {
        match self.dataset {
            Some(d) => self.section.group_label(d),
            None => format!("{}_all", &self.section.as_str()[..1]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Dataset × section × metric means, in dataset, section, metric order.
    pub rows: Vec<SummaryRow>,
    /// Section × metric means over all samples.
    pub pooled: Vec<SummaryRow>,
}

impl Summary {
    pub fn get(&self, dataset: Option<Dataset>, section: EvalSection, metric: MetricId) -> Option<&SummaryRow> {
        let rows = if dataset.is_some() { &self.rows } else { &self.pooled };
        rows.iter()
            .find(|r| r.dataset == dataset && r.section == section && r.metric == metric)
    }
}

/// Running sums for streaming aggregation. Results must be added in a
/// deterministic order for byte-stable output.
#[derive(Debug, Clone, Default)]
pub struct SummaryAccumulator {
    cells: BTreeMap<(Dataset, EvalSection, MetricId), (f64, usize)>,
    pooled: BTreeMap<(EvalSection, MetricId), (f64, usize)>,
    samples: usize,
}

impl SummaryAccumulator {
    pub fn add(&mut self, result: &EvaluationResult) {
        self.samples += 1;
        for section in EvalSection::ALL {
            for (metric, score) in result.section(section) {
                let cell = self.cells.entry((result.dataset, section, *metric)).or_insert((0.0, 0));
                cell.0 += score.value;
                cell.1 += 1;
                let pooled = self.pooled.entry((section, *metric)).or_insert((0.0, 0));
                pooled.0 += score.value;
                pooled.1 += 1;
            }
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn finish(&self) -> Summary {
        Summary {
            rows: self
                .cells
                .iter()
                .map(|(&(dataset, section, metric), &(sum, n))| SummaryRow {
                    dataset: Some(dataset),
                    section,
                    metric,
                    samples: n,
                    mean: sum / n as f64,
                })
                .collect(),
            pooled: self
                .pooled
                .iter()
                .map(|(&(section, metric), &(sum, n))| SummaryRow {
                    dataset: None,
                    section,
                    metric,
                    samples: n,
                    mean: sum / n as f64,
                })
                .collect(),
        }
    }
}

/// Dataset × section × metric means plus pooled means. Results are sorted
/// by sample id first, so the output does not depend on completion order.
pub fn aggregate_results(results: &[EvaluationResult]) -> Result<Summary, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let mut ordered: Vec<&EvaluationResult> = results.iter().collect();
    ordered.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let mut acc = SummaryAccumulator::default();
    for r in ordered {
        acc.add(r);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{ClientConfig, MockScorer};

    fn parse(text: &str) -> StructuredReport {
        parse_structured_report(text, &TemplateSpec::chest_xray()).unwrap()
    }

    const TWO_SYSTEMS: &str = "Findings:\nLungs and Airways:\n- No focal consolidation.\nCardiovascular:\n- Normal heart size.\nImpression:\n1. No acute process.";

    #[test]
    fn identity_scores_one() {
        let r = parse(TWO_SYSTEMS);
        for metric in [NativeMetric::bleu(), NativeMetric::rouge_l()] {
            assert_eq!(score_findings(&r, &r, &metric, AveragingMode::Union).unwrap().value, 1.0);
            assert_eq!(score_impression(&r, &r, &metric).unwrap().value, 1.0);
        }
    }

    #[test]
    fn renamed_header_scores_zero() {
        let hyp = parse("Findings:\nLungs:\n- No focal consolidation.");
        let reference = parse("Findings:\nLungs and Airways:\n- No focal consolidation.");
        let s = score_findings(&hyp, &reference, &NativeMetric::rouge_l(), AveragingMode::Union).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.penalized_systems, vec!["Lungs and Airways"]);

        let stray = parse("Findings:\nThorax:\n- Fine.\nLungs and Airways:\n- No focal consolidation.");
        let s = score_findings(&stray, &reference, &NativeMetric::rouge_l(), AveragingMode::Union).unwrap();
        assert_eq!(s.value, 0.5);
        assert_eq!(s.penalized_systems, vec!["unrecognized:Thorax"]);
    }

    #[test]
    fn one_sided_system_halves_the_score() {
        let hyp = parse("Findings:\nPleura:\n- Clear.\nOther:\n- Nothing.");
        let reference = parse("Findings:\nPleura:\n- Clear.");
        let m = NativeMetric::rouge_l();
        assert_eq!(score_findings(&hyp, &reference, &m, AveragingMode::Union).unwrap().value, 0.5);
        assert_eq!(score_findings(&hyp, &reference, &m, AveragingMode::Reference).unwrap().value, 1.0);
    }

    #[test]
    fn empty_findings_flagged() {
        let r = parse("Impression:\n1. Fine.");
        let s = score_findings(&r, &r, &NativeMetric::bleu(), AveragingMode::Union).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.flags, vec![SectionFlag::EmptyFindings]);
    }

    #[test]
    fn impression_numbering_does_not_change_value() {
        let hyp = parse("Impression:\n1. Small effusion.\n3. No pneumothorax.");
        let reference = parse("Impression:\n1. Small effusion.\n2. No pneumothorax.");
        let m = NativeMetric::rouge_l();
        let s = score_impression(&hyp, &reference, &m).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.flags, vec![SectionFlag::NumberingInconsistent]);

        let empty = parse("Impression:\nFindings:\nPleura:\n- x");
        let s = score_impression(&empty, &reference, &m).unwrap();
        assert_eq!((s.value, s.flags), (0.0, vec![SectionFlag::EmptyImpression]));
    }

    #[test]
    fn model_metric_needs_scorer() {
        let cfg = EvalConfig::default();
        let ev = Evaluator::new(&cfg, None);
        let input = SampleInput {
            sample_id: "s1",
            dataset: Dataset::Mimic,
            hypothesis: TWO_SYSTEMS,
            reference: TWO_SYSTEMS,
        };
        assert_eq!(
            ev.evaluate_sample(input, &[MetricId::RougeL, MetricId::Green]),
            Err(EvalError::ScorerUnavailable(MetricId::Green))
        );
        let ok = ev.evaluate_sample(input, &[MetricId::Bleu, MetricId::RougeL]).unwrap();
        assert!(ok.findings.values().chain(ok.impression.values()).all(|s| s.value == 1.0));
        assert!(ok.adherence.is_clean());
    }

    #[test]
    fn gateway_metrics_through_mock() {
        let client = ScorerClient::new(MockScorer::new(), ClientConfig::default());
        let cfg = EvalConfig::default();
        let ev = Evaluator::new(&cfg, Some(&client));
        let input = SampleInput {
            sample_id: "s1",
            dataset: Dataset::CheXpert,
            hypothesis: TWO_SYSTEMS,
            reference: TWO_SYSTEMS,
        };
        let all: Vec<MetricId> = MetricId::ALL.to_vec();
        let r = ev.evaluate_sample(input, &all).unwrap();
        for metric in all {
            assert_eq!(r.findings[&metric].value, 1.0, "{metric}");
            assert_eq!(r.impression[&metric].value, 1.0, "{metric}");
        }
    }

    #[test]
    fn srr_bert_uses_label_f1() {
        let client = ScorerClient::new(MockScorer::new(), ClientConfig::default());
        let metric = GatewayMetric {
            id: MetricId::F1SrrBert,
            client: &client,
            options: BTreeMap::new(),
            vocabulary: Some(&crate::scorer::mock::mock_vocabulary()),
            averaging: F1Averaging::Micro,
        };
        // hyp labels {Effusion Present, Pneumothorax Absent}; ref {Effusion Present, Pneumothorax Present}
        let pairs = vec![(
            "Small effusion. No pneumothorax.".to_string(),
            "Small effusion. Small pneumothorax.".to_string(),
        )];
        let scores = metric.score_pairs(&pairs).unwrap();
        assert_eq!(scores[0].value, 0.5);
    }

    #[test]
    fn aggregation_means() {
        let mk = |id: &str, dataset, v: f64| EvaluationResult {
            sample_id: id.into(),
            dataset,
            findings: BTreeMap::from([(
                MetricId::RougeL,
                SectionScore {
                    section: EvalSection::Findings,
                    per_system: BTreeMap::new(),
                    value: v,
                    penalized_systems: vec![],
                    flags: vec![],
                },
            )]),
            impression: BTreeMap::new(),
            adherence: AdherenceReport::default(),
        };
        assert_eq!(aggregate_results(&[]), Err(EvalError::EmptyList));
        let s = aggregate_results(&[mk("a", Dataset::Mimic, 0.4), mk("b", Dataset::Mimic, 0.6)]).unwrap();
        let row = s.get(Some(Dataset::Mimic), EvalSection::Findings, MetricId::RougeL).unwrap();
        assert!((row.mean - 0.5).abs() < 1e-12);
        assert_eq!(row.group_label(), "F_M");
        let s = aggregate_results(&[mk("a", Dataset::Mimic, 0.4), mk("b", Dataset::CheXpert, 0.8)]).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert!((s.pooled[0].mean - 0.6).abs() < 1e-12);
    }
}
