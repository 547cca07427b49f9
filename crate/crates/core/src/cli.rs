//! Command-line surface. The binary is a thin wrapper over [`run`].

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::adherence::{check_adherence, AdherenceReport};
use crate::config::RunConfig;
use crate::corpus::{CorpusFormat, CorpusReader, Reject, ReportPair};
use crate::cost::{comparison_table, measure_run, read_records, reference_records, write_comparisons, write_records, CostError, CostMode};
use crate::eval::{EvalConfig, EvaluationResult, Evaluator, SampleInput, SummaryAccumulator};
use crate::lexical::MetricId;
use crate::prompt::{build_icl_prompt, build_prefix_prompt, load_examples, PromptError, PromptTemplate};
use crate::report::parse_structured_report;
use crate::scorer::{HttpTransport, MockScorer, ScorerClient};

/// Samples evaluated per parallel batch; bounds memory on long corpora.
pub const CHUNK_SIZE: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "radstruct", version, about = "Structured chest X-ray report toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count template-adherence errors of every hypothesis in a corpus.
    Validate(ValidateArgs),
    /// Score hypotheses against references section by section.
    Evaluate(EvaluateArgs),
    /// Print an adaptation prompt for one report.
    Prompt(PromptArgs),
    /// Compare inference and training cost records against a baseline.
    Costs(CostsArgs),
    /// Parse a corpus and report accepted and rejected records.
    IngestCheck(IngestArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Defaults to CSV for `.csv` files and JSONL otherwise.
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Also write per-sample and aggregated reports here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Comma-separated metric ids.
    #[arg(long, value_delimiter = ',', default_value = "BLEU,ROUGE_L")]
    pub metrics: Vec<String>,
    /// Scorer root URL, or `mock` for the in-process deterministic scorer.
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptMode {
    Prefix,
    Icl,
    PrefixIcl,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// Free-text report file, `-` for standard input.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "prefix")]
    pub mode: PromptMode,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// JSONL file of {example_id, free_text, structured_text}.
    #[arg(long)]
    pub examples: Option<PathBuf>,
    /// Replaces the packaged structuring instruction.
    #[arg(long)]
    pub template: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostsArgs {
    /// Cost table CSV; the packaged reference table when omitted.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long, default_value = "lightweight")]
    pub baseline: String,
    #[arg(long, value_enum, default_value = "single")]
    pub mode: CostModeArg,
    /// Instead of comparing, build a record from per-sample seconds (one per line).
    #[arg(long)]
    pub durations: Option<PathBuf>,
    #[arg(long, default_value = "measured")]
    pub model_id: String,
    #[arg(long, default_value_t = 1)]
    pub gpu_count: u32,
    #[arg(long)]
    pub energy_kwh: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CostModeArg {
    Single,
    Batch,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs a parsed command, writing its primary output to `out`. Returns
/// the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Validate(a) => run_validate(&a, out).map(|_| ()),
        Command::Evaluate(a) => run_evaluate(&a).and_then(|o| {
            writeln!(out, "{}", o.describe()).map_err(runtime)?;
            if o.errors > 0 {
                Err(CliError::Runtime(format!("{} sample(s) failed; see errors.jsonl", o.errors)))
            } else {
                Ok(())
            }
        }),
        Command::Prompt(a) => run_prompt(&a, out),
        Command::Costs(a) => run_costs(&a, out),
        Command::IngestCheck(a) => run_ingest_check(&a, out).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("radstruct: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Usage(e.to_string())),
        None => Ok(RunConfig::default()),
    }
}

fn open_corpus(args: &CorpusArgs) -> Result<CorpusReader<File>, CliError> {
    let format = match args.format {
        Some(FormatArg::Jsonl) => CorpusFormat::Jsonl,
        Some(FormatArg::Csv) => CorpusFormat::Csv,
        None => CorpusFormat::from_path(&args.corpus),
    };
    CorpusReader::open(&args.corpus, format).map_err(runtime)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(w: &mut impl Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer(&mut *w, value).map_err(runtime)?;
    w.write_all(b"\n").map_err(runtime)
}

fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for r in rejects {
        write_jsonl(&mut w, r)?;
    }
    w.flush().map_err(runtime)
}

/// Adherence table in row-label order.
pub fn write_adherence_table(report: &AdherenceReport, out: &mut dyn Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "count"]).map_err(runtime)?;
    for (label, count) in AdherenceReport::ROW_LABELS.iter().zip(report.counts()) {
        w.write_record([label.to_string(), count.to_string()]).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

#[derive(Debug, Serialize)]
struct SampleError<'a> {
    sample_id: &'a str,
    error: String,
}

#[derive(Debug, Serialize)]
struct SampleAdherence<'a> {
    sample_id: &'a str,
    #[serde(flatten)]
    report: &'a AdherenceReport,
}

/// Corpus adherence totals plus per-sample failures.
#[derive(Debug, Clone, Default)]
pub struct ValidateOutcome {
    pub total: AdherenceReport,
    pub samples: usize,
    pub errors: usize,
}

pub fn run_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<ValidateOutcome, CliError> {
    let cfg = load_config(args.corpus.config.as_deref())?;
    let eval_cfg = cfg.eval_config().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut reader = open_corpus(&args.corpus)?;
    let mut per_sample = match &args.out_dir {
        Some(dir) => {
            create_dir(dir)?;
            Some(create(&dir.join("adherence.jsonl"))?)
        }
        None => None,
    };
    let mut outcome = ValidateOutcome::default();
    let mut errors = Vec::new();
    for (idx, pair) in reader.by_ref().enumerate() {
        let pair = pair.map_err(runtime)?;
        outcome.samples += 1;
        match validate_pair(&pair, &eval_cfg) {
            Ok(report) => {
                if let Some(w) = per_sample.as_mut() {
                    write_jsonl(w, &SampleAdherence {
                        sample_id: &pair.id,
                        report: &report,
                    })?;
                }
                outcome.total.absorb(&report, idx);
            }
            Err(e) => errors.push((pair.id, e)),
        }
    }
    reader.check_reject_ratio(cfg.corpus.max_reject_ratio).map_err(runtime)?;
    outcome.errors = errors.len();
    write_adherence_table(&outcome.total, out)?;
    if let Some(dir) = &args.out_dir {
        if let Some(mut w) = per_sample {
            w.flush().map_err(runtime)?;
        }
        let mut table = create(&dir.join("adherence.csv"))?;
        write_adherence_table(&outcome.total, &mut table)?;
        table.flush().map_err(runtime)?;
        let mut w = create(&dir.join("errors.jsonl"))?;
        for (id, e) in &errors {
            write_jsonl(&mut w, &SampleError {
                sample_id: id,
                error: e.clone(),
            })?;
        }
        w.flush().map_err(runtime)?;
        write_rejects(&dir.join("rejects.jsonl"), reader.rejects())?;
    }
    if outcome.errors > 0 {
        for (id, e) in &errors {
            eprintln!("{id}: {e}");
        }
        return Err(CliError::Runtime(format!("{} sample(s) could not be validated", outcome.errors)));
    }
    Ok(outcome)
}

fn validate_pair(pair: &ReportPair, cfg: &EvalConfig) -> Result<AdherenceReport, String> {
    let hyp_text = pair.structured_hypothesis.as_deref().ok_or("missing structured_hypothesis")?;
    let hyp = parse_structured_report(hyp_text, &cfg.spec).map_err(|e| format!("hypothesis: {e}"))?;
    let reference = parse_structured_report(&pair.structured_reference, &cfg.spec).ok();
    check_adherence(&hyp, reference.as_ref(), &cfg.spec, &cfg.negatives).map_err(|e| e.to_string())
}

/// Paths and counts of one `evaluate` run.
#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub out_dir: PathBuf,
    pub samples: usize,
    pub errors: usize,
    pub rejects: usize,
}

impl EvaluateOutcome {
    fn describe(&self) -> String {
        format!(
            "evaluated {} sample(s), {} error(s), {} reject(s) -> {}",
            self.samples,
            self.errors,
            self.rejects,
            self.out_dir.display()
        )
    }
}

pub fn parse_metrics(names: &[String]) -> Result<Vec<MetricId>, CliError> {
    let mut out = Vec::new();
    for name in names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()) {
        let id: MetricId = name.parse().map_err(|e: crate::lexical::UnknownMetric| CliError::Usage(e.to_string()))?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no metrics given".into()));
    }
    Ok(out)
}

fn build_scorer(endpoint: &str, cfg: &RunConfig) -> ScorerClient {
    let client_cfg = cfg.scorer.client.clone();
    if endpoint == "mock" {
        ScorerClient::new(MockScorer::new(), client_cfg)
    } else {
        let transport = HttpTransport::new(endpoint, client_cfg.timeout).with_env_token();
        ScorerClient::new(transport, client_cfg)
    }
}

#[derive(Debug, Serialize)]
struct Metadata {
    started_at: String,
    finished_at: String,
    elapsed_ms: u128,
}

#[derive(Debug, Serialize)]
struct SummaryCsvRow<'a> {
    group: String,
    dataset: &'a str,
    section: &'a str,
    metric: &'a str,
    samples: usize,
    mean_percent: String,
}

/// Evaluates a corpus and writes `results.jsonl`, `summary.csv`,
/// `summary_pooled.csv`, `adherence.csv`, `errors.jsonl`, `rejects.jsonl`
/// and `metadata.json` into the output directory. Everything except the
/// metadata file is byte-identical across runs and `--parallel` values.
pub fn run_evaluate(args: &EvaluateArgs) -> Result<EvaluateOutcome, CliError> {
    let started = chrono::Utc::now();
    let clock = std::time::Instant::now();
    let metrics = parse_metrics(&args.metrics)?;
    if args.parallel == 0 {
        return Err(CliError::Usage("--parallel must be at least 1".into()));
    }
    if let Some(m) = metrics.iter().find(|m| m.is_model_based()) {
        if args.scorer.is_none() {
            return Err(CliError::Usage(format!("{m} is model-based and needs --scorer")));
        }
    }
    let cfg = load_config(args.corpus.config.as_deref())?;
    let eval_cfg = cfg.eval_config().map_err(|e| CliError::Usage(e.to_string()))?;
    let scorer = match (&args.scorer, metrics.iter().any(|m| m.is_model_based())) {
        (Some(endpoint), true) => Some(build_scorer(endpoint, &cfg)),
        _ => None,
    };
    let evaluator = Evaluator::new(&eval_cfg, scorer.as_ref());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallel)
        .build()
        .map_err(runtime)?;

    let mut reader = open_corpus(&args.corpus)?;
    create_dir(&args.out_dir)?;
    let dir = &args.out_dir;
    let mut results_w = create(&dir.join("results.jsonl"))?;
    let mut errors_w = create(&dir.join("errors.jsonl"))?;
    let mut summary = SummaryAccumulator::default();
    let mut adherence = AdherenceReport::default();
    let mut samples = 0;
    let mut errors = 0;

    loop {
        let chunk: Vec<ReportPair> = reader.by_ref().take(CHUNK_SIZE).collect::<Result<_, _>>().map_err(runtime)?;
        if chunk.is_empty() {
            break;
        }
        let scored: Vec<Result<EvaluationResult, String>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|pair| {
                    let hypothesis = pair.structured_hypothesis.as_deref().ok_or("missing structured_hypothesis")?;
                    evaluator
                        .evaluate_sample(
                            SampleInput {
                                sample_id: &pair.id,
                                dataset: pair.source,
                                hypothesis,
                                reference: &pair.structured_reference,
                            },
                            &metrics,
                        )
                        .map_err(|e| e.to_string())
                })
                .collect()
        });
        for (pair, result) in chunk.iter().zip(scored) {
            match result {
                Ok(r) => {
                    write_jsonl(&mut results_w, &r)?;
                    summary.add(&r);
                    adherence.absorb(&r.adherence, samples);
                }
                Err(error) => {
                    errors += 1;
                    write_jsonl(&mut errors_w, &SampleError {
                        sample_id: &pair.id,
                        error,
                    })?;
                }
            }
            samples += 1;
        }
    }
    results_w.flush().map_err(runtime)?;
    errors_w.flush().map_err(runtime)?;
    write_rejects(&dir.join("rejects.jsonl"), reader.rejects())?;

    let table = summary.finish();
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(runtime)?;
    for row in &table.rows {
        let dataset = row.dataset.map(|d| d.as_str()).unwrap_or("all");
        w.serialize(SummaryCsvRow {
            group: row.group_label(),
            dataset,
            section: row.section.as_str(),
            metric: row.metric.as_str(),
            samples: row.samples,
            mean_percent: format!("{:.1}", row.mean * 100.0),
        })
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    let mut w = csv::Writer::from_path(dir.join("summary_pooled.csv")).map_err(runtime)?;
    for row in &table.pooled {
        w.serialize(SummaryCsvRow {
            group: row.group_label(),
            dataset: "all",
            section: row.section.as_str(),
            metric: row.metric.as_str(),
            samples: row.samples,
            mean_percent: format!("{:.1}", row.mean * 100.0),
        })
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    let mut table_w = create(&dir.join("adherence.csv"))?;
    write_adherence_table(&adherence, &mut table_w)?;
    table_w.flush().map_err(runtime)?;

    let metadata = Metadata {
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        elapsed_ms: clock.elapsed().as_millis(),
    };
    let mut w = create(&dir.join("metadata.json"))?;
    serde_json::to_writer_pretty(&mut w, &metadata).map_err(runtime)?;
    w.flush().map_err(runtime)?;

    reader.check_reject_ratio(cfg.corpus.max_reject_ratio).map_err(runtime)?;
    Ok(EvaluateOutcome {
        out_dir: dir.clone(),
        samples,
        errors,
        rejects: reader.rejects().len(),
    })
}

fn read_input(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text).map_err(runtime)?;
    } else {
        text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(text)
}

fn prompt_error(e: PromptError) -> CliError {
    match e {
        PromptError::Io { .. } => runtime(e),
        other => CliError::Usage(other.to_string()),
    }
}

pub fn run_prompt(args: &PromptArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.mode != PromptMode::Prefix && args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let report = read_input(&args.report)?;
    let report = report.trim_end_matches(['\n', '\r']);
    let template = match &args.template {
        Some(p) => PromptTemplate::from_file(p).map_err(prompt_error)?,
        None => PromptTemplate::structuring(),
    };
    let text = match args.mode {
        PromptMode::Prefix => build_prefix_prompt(report, &template).map_err(prompt_error)?,
        PromptMode::Icl | PromptMode::PrefixIcl => {
            let path = args
                .examples
                .as_deref()
                .ok_or_else(|| CliError::Usage("--examples is required for ICL modes".into()))?;
            let examples = load_examples(path, &crate::template::TemplateSpec::chest_xray()).map_err(prompt_error)?;
            let prefix = (args.mode == PromptMode::PrefixIcl).then_some(&template);
            build_icl_prompt(report, &examples, args.k, prefix).map_err(prompt_error)?
        }
    };
    out.write_all(text.as_bytes()).map_err(runtime)?;
    out.flush().map_err(runtime)
}

fn cost_error(e: CostError) -> CliError {
    match e {
        CostError::UnknownModel(_) | CostError::MissingRate(_) => CliError::Usage(e.to_string()),
        other => runtime(other),
    }
}

pub fn run_costs(args: &CostsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = &args.durations {
        let cfg = load_config(args.config.as_deref())?;
        let text = read_input(path)?;
        let durations = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| CliError::Runtime(format!("duration '{t}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let record = measure_run(&args.model_id, &durations, args.energy_kwh, &cfg.rates, args.gpu_count)
            .map_err(cost_error)?;
        return write_records(&[record], out).map_err(runtime);
    }
    let records = match &args.records {
        Some(p) => {
            let file = File::open(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
            read_records(file).map_err(runtime)?
        }
        None => reference_records(),
    };
    let mode = match args.mode {
        CostModeArg::Single => CostMode::SingleSample,
        CostModeArg::Batch => CostMode::Batch,
    };
    let rows = comparison_table(&records, &args.baseline, mode).map_err(cost_error)?;
    write_comparisons(&rows, out).map_err(runtime)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub with_hypothesis: usize,
    pub by_source: std::collections::BTreeMap<String, usize>,
    pub by_split: std::collections::BTreeMap<String, usize>,
}

pub fn run_ingest_check(args: &IngestArgs, out: &mut dyn Write) -> Result<IngestReport, CliError> {
    let cfg = load_config(args.corpus.config.as_deref())?;
    let mut reader = open_corpus(&args.corpus)?;
    let mut report = IngestReport::default();
    for pair in reader.by_ref() {
        let pair = pair.map_err(runtime)?;
        report.accepted += 1;
        report.with_hypothesis += usize::from(pair.structured_hypothesis.is_some());
        *report.by_source.entry(pair.source.to_string()).or_default() += 1;
        let split = serde_json::to_value(pair.split).ok().and_then(|v| v.as_str().map(str::to_string));
        *report.by_split.entry(split.unwrap_or_default()).or_default() += 1;
    }
    report.rejected = reader.rejects().len();
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        write_rejects(&dir.join("rejects.jsonl"), reader.rejects())?;
    }
    serde_json::to_writer_pretty(&mut *out, &report).map_err(runtime)?;
    writeln!(out).map_err(runtime)?;
    for r in reader.rejects() {
        eprintln!("line {}: {}", r.line, r.reason);
    }
    reader.check_reject_ratio(cfg.corpus.max_reject_ratio).map_err(runtime)?;
    Ok(report)
}
