//! Typed structured-report model, line parser and canonical serializer.
//!
//! Parsing never fails on a malformed report. Every input line is assigned
//! exactly one [`LineRole`], and deviations from the template are kept in
//! the model (header match kinds, unbulleted observations, raw impression
//! numbers, [`ParseFlag`]s) for the adherence checker to count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::template::{HeaderMatch, SectionKind, TemplateSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("report text is empty")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    /// False when the source line lacked the bullet marker.
    pub bulleted: bool,
    /// One-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrganSection {
    pub header_raw: String,
    pub header_canonical: Option<String>,
    pub header_match: HeaderMatch,
    pub observations: Vec<Observation>,
    pub line: usize,
}

impl OrganSection {
    /// Observation texts joined by single spaces.
    pub fn joined_text(&self) -> String {
        join_texts(self.observations.iter().map(|o| o.text.as_str()))
    }

    pub fn unbulleted_count(&self) -> usize {
        self.observations.iter().filter(|o| !o.bulleted).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpressionItem {
    pub number_raw: Option<u64>,
    pub text: String,
    pub line: usize,
}

/// What a single source line turned out to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineRole {
    Blank,
    /// Text before the first section header.
    Preamble,
    SectionHeader(SectionKind),
    SectionBody(SectionKind),
    /// Index into [`StructuredReport::findings`].
    OrganHeader(usize),
    Observation(usize),
    ImpressionItem(usize),
    /// Findings text outside any organ subsection, or an impression line
    /// that carried no text.
    Orphan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParseFlagCode {
    UnbulletedObservation,
    OrphanLine,
    DuplicateOrganHeader,
    DuplicateSection,
    EmptyImpressionItem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFlag {
    pub code: ParseFlagCode,
    pub line: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredReport {
    /// Raw body text of every section header that was found.
    pub sections: BTreeMap<SectionKind, String>,
    pub findings: Vec<OrganSection>,
    /// Findings lines that appeared before the first organ header.
    pub findings_orphans: Vec<String>,
    pub impression: Vec<ImpressionItem>,
    pub preamble: Vec<String>,
    pub lines: Vec<LineRole>,
    pub flags: Vec<ParseFlag>,
    pub provenance: String,
    pub spec_fingerprint: u64,
}

impl StructuredReport {
    pub fn has_section(&self, kind: SectionKind) -> bool {
        self.sections.contains_key(&kind)
    }

    /// Organ sections whose header resolved to a canonical name.
    pub fn recognized_systems(&self) -> impl Iterator<Item = (&str, &OrganSection)> {
        self.findings
            .iter()
            .filter_map(|s| s.header_canonical.as_deref().map(|c| (c, s)))
    }

    pub fn system(&self, canonical: &str) -> Option<&OrganSection> {
        self.findings
            .iter()
            .find(|s| s.header_canonical.as_deref() == Some(canonical))
    }

    /// Impression item texts joined by single spaces, numbering removed.
    pub fn impression_text(&self) -> String {
        join_texts(self.impression.iter().map(|i| i.text.as_str()))
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }
}

fn join_texts<'a>(texts: impl Iterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for t in texts {
        let t = t.trim();
        if t.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

fn section_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(exam\s+type|history|technique|comparison|findings|impression)\s*:(.*)$")
            .unwrap()
    })
}

fn impression_number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d+)\.(?:\s+|$)(.*)$").unwrap())
}

/// Recognizes a section header line, returning the kind and any text that
/// follows the colon on the same line.
fn match_section_header(line: &str) -> Option<(SectionKind, &str)> {
    let caps = section_header_re().captures(line)?;
    let name = caps.get(1)?.as_str();
    let normalized = name.split_whitespace().collect::<Vec<_>>().join(" ");
    let kind = SectionKind::from_title(&normalized)?;
    Some((kind, caps.get(2).map_or("", |m| m.as_str()).trim()))
}

/// Splits an impression line into its leading number (if any) and text.
fn split_impression_line<'a>(line: &'a str, bullet: &str) -> (Option<u64>, &'a str) {
    let trimmed = line.trim();
    if let Some(caps) = impression_number_re().captures(trimmed) {
        let number = caps.get(1).and_then(|m| m.as_str().parse::<u64>().ok());
        if number.is_some() {
            return (number, caps.get(2).map_or("", |m| m.as_str()).trim());
        }
    }
    let bullet = bullet.trim_end();
    let text = trimmed.strip_prefix(bullet).unwrap_or(trimmed).trim();
    (None, text)
}

struct Parser<'s> {
    spec: &'s TemplateSpec,
    report: StructuredReport,
    current: Option<SectionKind>,
    current_organ: Option<usize>,
    bodies: BTreeMap<SectionKind, Vec<String>>,
}

impl<'s> Parser<'s> {
    fn new(spec: &'s TemplateSpec) -> Self {
        Parser {
            spec,
            report: StructuredReport {
                sections: BTreeMap::new(),
                findings: Vec::new(),
                findings_orphans: Vec::new(),
                impression: Vec::new(),
                preamble: Vec::new(),
                lines: Vec::new(),
                flags: Vec::new(),
                provenance: String::new(),
                spec_fingerprint: spec.fingerprint(),
            },
            current: None,
            current_organ: None,
            bodies: BTreeMap::new(),
        }
    }

    fn flag(&mut self, code: ParseFlagCode, line: usize, detail: impl Into<String>) {
        self.report.flags.push(ParseFlag {
            code,
            line,
            detail: detail.into(),
        });
    }

    fn line(&mut self, line_no: usize, raw: &str) {
        let line = raw.trim_end_matches('\r');
        if let Some((kind, inline)) = match_section_header(line) {
            self.open_section(kind, line_no);
            self.report.lines.push(LineRole::SectionHeader(kind));
            if !inline.is_empty() {
                // Inline content shares the header's line; its role is the header's.
                self.body_content(kind, line_no, inline, false);
            }
            return;
        }
        if line.trim().is_empty() {
            self.report.lines.push(LineRole::Blank);
            return;
        }
        let role = match self.current {
            None => {
                self.report.preamble.push(line.trim().to_string());
                LineRole::Preamble
            }
            Some(kind) => self.body_content(kind, line_no, line, true),
        };
        self.report.lines.push(role);
    }

    fn open_section(&mut self, kind: SectionKind, line_no: usize) {
        if self.bodies.contains_key(&kind) {
            self.flag(
                ParseFlagCode::DuplicateSection,
                line_no,
                format!("{} header repeated", kind.title()),
            );
        }
        self.bodies.entry(kind).or_default();
        self.current = Some(kind);
        self.current_organ = None;
    }

    fn body_content(&mut self, kind: SectionKind, line_no: usize, line: &str, own_line: bool) -> LineRole {
        if let Some(body) = self.bodies.get_mut(&kind) {
            body.push(line.trim().to_string());
        }
        match kind {
            SectionKind::Findings => self.findings_line(line_no, line, own_line),
            SectionKind::Impression => self.impression_line(line_no, line),
            other => LineRole::SectionBody(other),
        }
    }

    fn findings_line(&mut self, line_no: usize, line: &str, own_line: bool) -> LineRole {
        let trimmed = line.trim();
        let bullet = self.spec.bullet_marker();
        if let Some(rest) = trimmed.strip_prefix(bullet) {
            return self.add_observation(line_no, rest.trim(), true);
        }
        if own_line && trimmed.ends_with(':') && trimmed.len() > 1 {
            let raw = trimmed[..trimmed.len() - 1].trim_end();
            return self.open_organ(line_no, raw);
        }
        self.add_observation(line_no, trimmed, false)
    }

    fn open_organ(&mut self, line_no: usize, raw: &str) -> LineRole {
        let (kind, canonical) = self.spec.classify_header(raw);
        let canonical = canonical.map(str::to_string);
        if let Some(name) = &canonical {
            if let Some(idx) = self
                .report
                .findings
                .iter()
                .position(|s| s.header_canonical.as_ref() == Some(name))
            {
                self.flag(
                    ParseFlagCode::DuplicateOrganHeader,
                    line_no,
                    format!("'{raw}' repeats '{name}'; observations merged"),
                );
                self.current_organ = Some(idx);
                return LineRole::OrganHeader(idx);
            }
        }
        self.report.findings.push(OrganSection {
            header_raw: raw.to_string(),
            header_canonical: canonical,
            header_match: kind,
            observations: Vec::new(),
            line: line_no,
        });
        let idx = self.report.findings.len() - 1;
        self.current_organ = Some(idx);
        LineRole::OrganHeader(idx)
    }

    fn add_observation(&mut self, line_no: usize, text: &str, bulleted: bool) -> LineRole {
        match self.current_organ {
            Some(idx) => {
                if !bulleted {
                    self.flag(
                        ParseFlagCode::UnbulletedObservation,
                        line_no,
                        format!("observation without '{}'", self.spec.bullet_marker().trim_end()),
                    );
                }
                self.report.findings[idx].observations.push(Observation {
                    text: text.to_string(),
                    bulleted,
                    line: line_no,
                });
                LineRole::Observation(idx)
            }
            None => {
                self.flag(
                    ParseFlagCode::OrphanLine,
                    line_no,
                    "findings text outside any organ-system header",
                );
                self.report.findings_orphans.push(text.to_string());
                LineRole::Orphan
            }
        }
    }

    fn impression_line(&mut self, line_no: usize, line: &str) -> LineRole {
        let (number, text) = split_impression_line(line, self.spec.bullet_marker());
        if text.is_empty() {
            self.flag(ParseFlagCode::EmptyImpressionItem, line_no, "impression item without text");
            return LineRole::Orphan;
        }
        self.report.impression.push(ImpressionItem {
            number_raw: number,
            text: text.to_string(),
            line: line_no,
        });
        LineRole::ImpressionItem(self.report.impression.len() - 1)
    }

    fn finish(mut self) -> StructuredReport {
        for (kind, body) in std::mem::take(&mut self.bodies) {
            let start = body.iter().position(|l| !l.is_empty()).unwrap_or(body.len());
            let end = body.iter().rposition(|l| !l.is_empty()).map_or(start, |i| i + 1);
            self.report.sections.insert(kind, body[start..end].join("\n"));
        }
        self.report
    }
}

/// Parses structured-report text against `spec`.
pub fn parse_structured_report(text: &str, spec: &TemplateSpec) -> Result<StructuredReport, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let mut parser = Parser::new(spec);
    for (idx, line) in text.split('\n').enumerate() {
        parser.line(idx + 1, line);
    }
    Ok(parser.finish())
}

/// Emits the canonical text form of a report.
///
/// Sections appear in template order, separated by one blank line. Organ
/// headers use canonical casing (unrecognized ones keep their raw text),
/// observations are bulleted and impression items are renumbered from 1.
pub fn serialize_report(report: &StructuredReport, spec: &TemplateSpec) -> String {
    let mut blocks: Vec<String> = Vec::new();
    if !report.preamble.is_empty() {
        blocks.push(report.preamble.join("\n"));
    }
    for kind in spec.sections() {
        let Some(body) = report.sections.get(kind) else {
            continue;
        };
        let mut block = format!("{}:", kind.title());
        match kind {
            SectionKind::Findings => {
                for orphan in &report.findings_orphans {
                    let _ = write!(block, "\n{orphan}");
                }
                for organ in &report.findings {
                    let header = organ.header_canonical.as_deref().unwrap_or(&organ.header_raw);
                    let _ = write!(block, "\n{header}:");
                    for obs in &organ.observations {
                        let _ = write!(block, "\n{}{}", spec.bullet_marker(), obs.text);
                    }
                }
            }
            SectionKind::Impression => {
                for (i, item) in report.impression.iter().enumerate() {
                    let _ = write!(block, "\n{}. {}", i + 1, item.text);
                }
            }
            _ => {
                if !body.is_empty() {
                    block.push('\n');
                    block.push_str(body);
                }
            }
        }
        blocks.push(block);
    }
    let mut out = blocks.join("\n\n");
    out.push('\n');
    out
}

fn underscore_run_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"_{3,}").unwrap())
}

/// Removes every sentence that contains a run of three or more underscores
/// (the de-identification placeholder). Other bytes are preserved.
pub fn strip_deidentified_sentences(text: &str) -> String {
    // Segment = sentence plus the whitespace that follows its terminator.
    let mut segments: Vec<&str> = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if matches!(b, b'.' | b'!' | b'?') {
            let next = bytes.get(i + 1);
            if next.is_none() || next.is_some_and(|c| c.is_ascii_whitespace()) {
                let mut end = i + 1;
                while end < bytes.len() && bytes[end].is_ascii_whitespace() {
                    end += 1;
                }
                segments.push(&text[start..end]);
                start = end;
                i = end;
                continue;
            }
        }
        i += 1;
    }
    if start < text.len() {
        segments.push(&text[start..]);
    }

    let mut out = String::with_capacity(text.len());
    let mut dropped_last = false;
    for seg in &segments {
        if underscore_run_re().is_match(seg) {
            dropped_last = true;
        } else {
            out.push_str(seg);
            dropped_last = false;
        }
    }
    if dropped_last {
        let kept = out.trim_end().len();
        out.truncate(kept);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> TemplateSpec {
        TemplateSpec::chest_xray()
    }

    #[test]
    fn minimal_report() {
        let text = "Findings:\nLungs and Airways:\n- No focal consolidation.\nImpression:\n1. No acute process.";
        let r = parse_structured_report(text, &spec()).unwrap();
        assert_eq!(r.findings.len(), 1);
        let organ = &r.findings[0];
        assert_eq!(organ.header_match, HeaderMatch::Exact);
        assert_eq!(organ.header_canonical.as_deref(), Some("Lungs and Airways"));
        assert_eq!(organ.observations.len(), 1);
        assert_eq!(organ.observations[0].text, "No focal consolidation.");
        assert_eq!(r.impression.len(), 1);
        assert_eq!(r.impression[0].number_raw, Some(1));
        assert_eq!(r.impression[0].text, "No acute process.");
        assert_eq!(r.lines.len(), 5);
        assert!(r.flags.is_empty());
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse_structured_report("", &spec()), Err(ParseError::EmptyInput));
        assert_eq!(parse_structured_report(" \n\t\n", &spec()), Err(ParseError::EmptyInput));
    }

    #[test]
    fn upper_case_header_is_case_variant() {
        let r = parse_structured_report("Findings:\nLUNGS AND AIRWAYS:\n- Clear.", &spec()).unwrap();
        assert_eq!(r.findings[0].header_match, HeaderMatch::CaseVariant);
        assert_eq!(r.findings[0].header_canonical.as_deref(), Some("Lungs and Airways"));
    }

    #[test]
    fn section_headers_are_case_insensitive_and_need_colon() {
        let r = parse_structured_report("  FINDINGS :\nPleura:\n- Clear.\nIMPRESSION\n1. x", &spec()).unwrap();
        assert!(r.has_section(SectionKind::Findings));
        assert!(!r.has_section(SectionKind::Impression));
        // "IMPRESSION" without colon is treated as findings content.
        assert_eq!(r.findings[0].observations.len(), 3);
        assert_eq!(r.findings[0].unbulleted_count(), 2);
    }

    #[test]
    fn inline_section_content() {
        let r = parse_structured_report("Exam Type: Chest PA and lateral\nHistory:\nCough.", &spec()).unwrap();
        assert_eq!(r.sections[&SectionKind::ExamType], "Chest PA and lateral");
        assert_eq!(r.sections[&SectionKind::History], "Cough.");
        assert_eq!(r.lines.len(), 3);
    }

    #[test]
    fn unbulleted_and_orphan_lines_are_kept() {
        let text = "Findings:\nStray sentence.\nPleura:\nNo effusion.\n- Clear.";
        let r = parse_structured_report(text, &spec()).unwrap();
        assert_eq!(r.findings_orphans, vec!["Stray sentence."]);
        assert_eq!(r.findings[0].observations.len(), 2);
        assert!(!r.findings[0].observations[0].bulleted);
        let codes: Vec<_> = r.flags.iter().map(|f| f.code).collect();
        assert_eq!(codes, vec![ParseFlagCode::OrphanLine, ParseFlagCode::UnbulletedObservation]);
    }

    #[test]
    fn duplicate_canonical_headers_merge() {
        let text = "Findings:\nPleura:\n- A.\nCardiovascular:\n- B.\npleura:\n- C.";
        let r = parse_structured_report(text, &spec()).unwrap();
        assert_eq!(r.findings.len(), 2);
        assert_eq!(r.system("Pleura").unwrap().observations.len(), 2);
        assert!(r.flags.iter().any(|f| f.code == ParseFlagCode::DuplicateOrganHeader));
    }

    #[test]
    fn impression_numbering_forms() {
        let text = "Impression:\n1. A\n3. B\n- C\nD\n1.5 cm nodule\n4.";
        let r = parse_structured_report(text, &spec()).unwrap();
        let numbers: Vec<_> = r.impression.iter().map(|i| i.number_raw).collect();
        assert_eq!(numbers, vec![Some(1), Some(3), None, None, None]);
        let texts: Vec<_> = r.impression.iter().map(|i| i.text.as_str()).collect();
        assert_eq!(texts, vec!["A", "B", "C", "D", "1.5 cm nodule"]);
        assert_eq!(r.lines.last(), Some(&LineRole::Orphan));
    }

    #[test]
    fn preamble_lines() {
        let r = parse_structured_report("Radiology report\n\nFindings:\nOther:\n- X", &spec()).unwrap();
        assert_eq!(r.preamble, vec!["Radiology report"]);
        assert_eq!(r.lines[0], LineRole::Preamble);
        assert_eq!(r.lines[1], LineRole::Blank);
    }

    #[test]
    fn serialize_renumbers_and_canonicalizes() {
        let text = "Findings:\nLUNGS AND AIRWAYS:\n- Clear.\nImpression:\n1. One.\n3. Two.";
        let r = parse_structured_report(text, &spec()).unwrap();
        let out = serialize_report(&r, &spec());
        assert_eq!(out, "Findings:\nLungs and Airways:\n- Clear.\n\nImpression:\n1. One.\n2. Two.\n");
    }

    #[test]
    fn serialization_is_a_fixed_point() {
        let text = "Exam Type: CXR\nFindings:\nnote\nlungs and airways:\nClear.\nLungs:\n- x\nImpression:\n2. a\n- b";
        let first = serialize_report(&parse_structured_report(text, &spec()).unwrap(), &spec());
        let second = serialize_report(&parse_structured_report(&first, &spec()).unwrap(), &spec());
        assert_eq!(first, second);
    }

    #[test]
    fn strips_deidentified_sentences() {
        assert_eq!(
            strip_deidentified_sentences("Comparison to ___ study. Heart size normal."),
            "Heart size normal."
        );
        assert_eq!(strip_deidentified_sentences("No underscores here."), "No underscores here.");
        assert_eq!(strip_deidentified_sentences("A __ b. C ___ d. E."), "A __ b. E.");
        assert_eq!(strip_deidentified_sentences("A. B ___."), "A.");
        assert_eq!(strip_deidentified_sentences("Dr. ____ called"), "Dr.");
        assert_eq!(strip_deidentified_sentences(""), "");
    }
}
