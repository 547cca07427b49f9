//! Tooling for structured chest X-ray reports: a template-aware parser,
//! adherence checks, section-wise scoring with lexical and model-based
//! metrics, prompt assembly and inference cost accounting.
//!
//! ```
//! use radstruct::{parse_structured_report, HeaderMatch, TemplateSpec};
//!
//! let spec = TemplateSpec::chest_xray();
//! let report = parse_structured_report("Findings:\nLUNGS AND AIRWAYS:\n- Clear.", &spec).unwrap();
//! assert_eq!(report.findings[0].header_match, HeaderMatch::CaseVariant);
//! ```

pub mod adherence;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod cost;
pub mod eval;
pub mod lexical;
pub mod prompt;
pub mod report;
pub mod scorer;
pub mod synthetic;
pub mod template;

pub use adherence::{aggregate_adherence, check_adherence, AdherenceReport, NegativeFindingPatterns};
pub use corpus::{ingest_corpus, CorpusFormat, CorpusReader, ReportPair, Split};
pub use cost::{compare_costs, compare_training, measure_run, CostComparison, CostMode, RateConfig, RunCostRecord};
pub use eval::{
    aggregate_results, score_findings, score_impression, AveragingMode, Dataset, EvalConfig, EvaluationResult,
    Evaluator, NativeMetric, SampleInput, SectionScore, TextMetric,
};
pub use lexical::{bleu, compute_label_f1, rouge_l, tokenize, BleuConfig, MetricId, MetricScore};
pub use prompt::{build_icl_prompt, build_prefix_prompt, IclExample, PromptTemplate};
pub use report::{parse_structured_report, serialize_report, StructuredReport};
pub use scorer::{ClientConfig, HttpTransport, MockScorer, ScorerClient};
pub use template::{HeaderMatch, SectionKind, TemplateSpec};
