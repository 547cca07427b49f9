//! Streaming ingestion of report-pair corpora from JSONL or CSV.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::Dataset;

pub const DEFAULT_MAX_REJECT_RATIO: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train", alias = "Train", alias = "TRAIN")]
    Train,
    #[serde(rename = "validation", alias = "Validation", alias = "val", alias = "valid")]
    Validation,
    #[serde(rename = "test", alias = "Test", alias = "TEST")]
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportPair {
    pub id: String,
    pub source: Dataset,
    pub split: Split,
    pub free_text: String,
    pub structured_reference: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured_hypothesis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

impl ReportPair {
    fn normalize(mut self) -> Result<Self, String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.free_text.trim().is_empty() {
            return Err("free_text is empty".into());
        }
        self.structured_hypothesis = self.structured_hypothesis.filter(|s| !s.is_empty());
        self.model_id = self.model_id.filter(|s| !s.is_empty());
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` means CSV; anything else is read as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            _ => Err(format!("unknown corpus format '{s}'")),
        }
    }
}

/// A record that could not be ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// One-based line in the input.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

enum Source<R: Read> {
    Jsonl { lines: std::io::Lines<BufReader<R>>, line: u64 },
    Csv(csv::DeserializeRecordsIntoIter<R, ReportPair>),
}

/// Line number plus the record or its rejection reason.
type RawRecord = (u64, Result<ReportPair, String>);

/// Yields valid pairs in file order while collecting rejects. Fails on the
/// first duplicate id.
pub struct CorpusReader<R: Read> {
    source: Source<R>,
    seen: HashSet<String>,
    rejects: Vec<Reject>,
    accepted: usize,
    failed: bool,
}

impl CorpusReader<File> {
    pub fn open(path: &Path, format: CorpusFormat) -> Result<Self, CorpusError> {
        let file = File::open(path).map_err(|e| CorpusError::UnreadableFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Ok(CorpusReader::new(file, format))
    }
}

impl<R: Read> CorpusReader<R> {
    pub fn new(reader: R, format: CorpusFormat) -> Self {
        let source = match format {
            CorpusFormat::Jsonl => Source::Jsonl {
                lines: BufReader::new(reader).lines(),
                line: 0,
            },
            CorpusFormat::Csv => Source::Csv(
                csv::ReaderBuilder::new().flexible(true).from_reader(reader).into_deserialize(),
            ),
        };
        CorpusReader {
            source,
            seen: HashSet::new(),
            rejects: Vec::new(),
            accepted: 0,
            failed: false,
        }
    }

    pub fn rejects(&self) -> &[Reject] {
        &self.rejects
    }

    pub fn take_rejects(&mut self) -> Vec<Reject> {
        std::mem::take(&mut self.rejects)
    }

    pub fn accepted(&self) -> usize {
        self.accepted
    }

    /// Next non-blank record with its line and parse outcome; `Err` is fatal.
    fn next_raw(&mut self) -> Option<Result<RawRecord, CorpusError>> {
        match &mut self.source {
            Source::Jsonl { lines, line } => loop {
                let text = match lines.next()? {
                    Ok(t) => t,
                    Err(e) => {
                        return Some(Err(CorpusError::UnreadableFile {
                            path: "<corpus>".into(),
                            reason: e.to_string(),
                        }))
                    }
                };
                *line += 1;
                if text.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<ReportPair>(&text).map_err(|e| e.to_string());
                return Some(Ok((*line, parsed)));
            },
            Source::Csv(rows) => {
                let row = rows.next()?;
                let line = match &row {
                    Ok(_) => 0,
                    Err(e) => e.position().map_or(0, |p| p.line()),
                };
                match row {
                    Ok(pair) => Some(Ok((line, Ok(pair)))),
                    Err(e) if e.is_io_error() => Some(Err(CorpusError::UnreadableFile {
                        path: "<corpus>".into(),
                        reason: e.to_string(),
                    })),
                    Err(e) => Some(Ok((line, Err(e.to_string())))),
                }
            }
        }
    }

    fn csv_line(&self) -> Option<u64> {
        match &self.source {
            Source::Csv(rows) => Some(rows.reader().position().line()),
            Source::Jsonl { .. } => None,
        }
    }

    /// Fails with `SchemaViolation` when more than `max_ratio` of the
    /// records read so far were rejected.
    pub fn check_reject_ratio(&self, max_ratio: f64) -> Result<(), CorpusError> {
        let total = self.accepted + self.rejects.len();
        if total > 0 && self.rejects.len() as f64 > max_ratio * total as f64 {
            return Err(CorpusError::SchemaViolation(format!(
                "{} of {total} records rejected, above the {:.1}% limit",
                self.rejects.len(),
                max_ratio * 100.0
            )));
        }
        Ok(())
    }
}

impl<R: Read> Iterator for CorpusReader<R> {
    type Item = Result<ReportPair, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let (mut line, parsed) = match self.next_raw()? {
                Ok(v) => v,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            };
            if line == 0 {
                // csv positions point just past the record that was read
                line = self.csv_line().map_or(0, |l| l.saturating_sub(1));
            }
            match parsed.and_then(ReportPair::normalize) {
                Ok(pair) => {
                    if !self.seen.insert(pair.id.clone()) {
                        self.failed = true;
                        return Some(Err(CorpusError::SchemaViolation(format!(
                            "duplicate id '{}' at line {line}",
                            pair.id
                        ))));
                    }
                    self.accepted += 1;
                    return Some(Ok(pair));
                }
                Err(reason) => self.rejects.push(Reject { line, reason }),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub pairs: Vec<ReportPair>,
    pub rejects: Vec<Reject>,
}

/// Reads a whole corpus into memory.
pub fn ingest_corpus(path: &Path, format: CorpusFormat, max_reject_ratio: f64) -> Result<Ingested, CorpusError> {
    let mut reader = CorpusReader::open(path, format)?;
    let pairs = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    reader.check_reject_ratio(max_reject_ratio)?;
    Ok(Ingested {
        pairs,
        rejects: reader.take_rejects(),
    })
}
