//! Adaptation prompts: the structuring instruction prefix, k-shot example
//! blocks and their composition.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::parse_structured_report;
use crate::template::TemplateSpec;

pub const PLACEHOLDER: &str = "{report}";

/// The packaged structuring instruction, byte for byte.
pub const STRUCTURING_PROMPT: &str = include_str!("../assets/structuring_prompt.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template '{id}' must contain exactly one {PLACEHOLDER} placeholder, found {found}")]
    MissingPlaceholder { id: String, found: usize },
    #[error("requested {k} examples but only {available} are available")]
    NotEnoughExamples { k: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroShots,
    #[error("report text is empty")]
    EmptyReport,
    #[error("example '{id}': {reason}")]
    InvalidExample { id: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    body: String,
    slot: usize,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Result<Self, PromptError> {
        let id = id.into();
        let body = body.into();
        let found = body.matches(PLACEHOLDER).count();
        if found != 1 {
            return Err(PromptError::MissingPlaceholder { id, found });
        }
        let slot = body.find(PLACEHOLDER).expect("counted above");
        Ok(PromptTemplate { id, body, slot })
    }

    /// The packaged structuring instruction.
    pub fn structuring() -> Self {
        PromptTemplate::new("structuring", STRUCTURING_PROMPT).expect("packaged template has one placeholder")
    }

    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        let body = std::fs::read_to_string(path).map_err(|e| PromptError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        PromptTemplate::new(id, body)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Byte range of the placeholder in the body.
    pub fn placeholder_span(&self) -> std::ops::Range<usize> {
        self.slot..self.slot + PLACEHOLDER.len()
    }

    /// The body with the whole line holding the placeholder removed,
    /// trailing whitespace trimmed and a blank line appended.
    pub fn prefix_without_slot(&self) -> String {
        let line_start = self.body[..self.slot].rfind('\n').map_or(0, |i| i + 1);
        let line_end = self.body[self.slot..].find('\n').map_or(self.body.len(), |i| self.slot + i + 1);
        let mut out = String::with_capacity(self.body.len());
        out.push_str(&self.body[..line_start]);
        out.push_str(&self.body[line_end..]);
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
        if !out.is_empty() {
            out.push_str("\n\n");
        }
        out
    }
}

pub fn build_prefix_prompt(report: &str, template: &PromptTemplate) -> Result<String, PromptError> {
    if report.trim().is_empty() {
        return Err(PromptError::EmptyReport);
    }
    let span = template.placeholder_span();
    let body = template.body();
    let mut out = String::with_capacity(body.len() + report.len());
    out.push_str(&body[..span.start]);
    out.push_str(report);
    out.push_str(&body[span.end..]);
    Ok(out)
}

/// A free-text report with its structured counterpart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IclExample {
    pub example_id: String,
    pub free_text: String,
    pub structured_text: String,
}

impl IclExample {
    pub fn new(
        example_id: impl Into<String>,
        free_text: impl Into<String>,
        structured_text: impl Into<String>,
        spec: &TemplateSpec,
    ) -> Result<Self, PromptError> {
        let example = IclExample {
            example_id: example_id.into(),
            free_text: free_text.into(),
            structured_text: structured_text.into(),
        };
        example.validate(spec)?;
        Ok(example)
    }

    pub fn validate(&self, spec: &TemplateSpec) -> Result<(), PromptError> {
        let invalid = |reason: &str| PromptError::InvalidExample {
            id: self.example_id.clone(),
            reason: reason.to_string(),
        };
        if self.free_text.trim().is_empty() {
            return Err(invalid("free_text is empty"));
        }
        let parsed = parse_structured_report(&self.structured_text, spec).map_err(|_| invalid("structured_text is empty"))?;
        if parsed.findings.is_empty() {
            return Err(invalid("structured_text has no organ-system subsection"));
        }
        Ok(())
    }
}

/// Reads one example per JSONL line; blank lines are skipped.
pub fn load_examples(path: &Path, spec: &TemplateSpec) -> Result<Vec<IclExample>, PromptError> {
    let io = |e: &dyn std::fmt::Display| PromptError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    let file = File::open(path).map_err(|e| io(&e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io(&e))?;
        if line.trim().is_empty() {
            continue;
        }
        let example: IclExample =
            serde_json::from_str(&line).map_err(|e| io(&format!("line {}: {e}", n + 1)))?;
        example.validate(spec)?;
        out.push(example);
    }
    Ok(out)
}

/// One `Input:`/`Output:` block.
pub fn icl_block(input: &str, output: &str) -> String {
    format!("Input:\n{input}\n\nOutput:\n{output}\n\n")
}

/// `k` example blocks in list order followed by the query, optionally
/// preceded by `prefix` with its placeholder line removed.
pub fn build_icl_prompt(
    report: &str,
    examples: &[IclExample],
    k: usize,
    prefix: Option<&PromptTemplate>,
) -> Result<String, PromptError> {
    if k == 0 {
        return Err(PromptError::ZeroShots);
    }
    if k > examples.len() {
        return Err(PromptError::NotEnoughExamples {
            k,
            available: examples.len(),
        });
    }
    if report.trim().is_empty() {
        return Err(PromptError::EmptyReport);
    }
    let mut out = prefix.map(PromptTemplate::prefix_without_slot).unwrap_or_default();
    for example in &examples[..k] {
        out.push_str(&icl_block(&example.free_text, &example.structured_text));
    }
    out.push_str("Input:\n");
    out.push_str(report);
    out.push_str("\n\nOutput:\n");
    Ok(out)
}
