//! Template-adherence error counting.
//!
//! Counts follow a four-row taxonomy: missing or misspelled headers,
//! different organ-system names, bullet/enumeration inconsistencies, and
//! mismatched organ systems (split into potentially irrelevant and
//! potentially relevant).

use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::report::{ImpressionItem, OrganSection, StructuredReport};
use crate::template::{HeaderMatch, SectionKind, TemplateSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdherenceError {
    #[error("report was parsed under a different template (fingerprint {found:#x}, expected {expected:#x})")]
    SpecMismatch { expected: u64, found: u64 },
    #[error("cannot aggregate an empty list of adherence reports")]
    EmptyList,
    #[error("invalid negative-finding pattern '{pattern}': {reason}")]
    InvalidPattern { pattern: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AdherenceCode {
    MissingSectionHeader,
    MisspelledOrganHeader,
    DifferentOrganName,
    UnbulletedObservation,
    NumberingInconsistency,
    SystemOnlyInHypothesis,
    SystemOnlyInReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdherenceFlag {
    pub code: AdherenceCode,
    /// One-based line in the hypothesis, 0 when not tied to a line.
    pub line: usize,
    pub detail: String,
    /// Corpus position, set by [`aggregate_adherence`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdherenceReport {
    pub missing_or_misspelled_headers: u64,
    pub different_organ_names: u64,
    pub bullet_enumeration_inconsistencies: u64,
    pub organ_mismatch_total: u64,
    pub organ_mismatch_irrelevant: u64,
    pub organ_mismatch_relevant: u64,
    pub flags: Vec<AdherenceFlag>,
}

impl AdherenceReport {
    pub fn is_clean(&self) -> bool {
        self.counts() == [0; 6]
    }

    /// Counts in table-row order.
    pub fn counts(&self) -> [u64; 6] {
        [
            self.missing_or_misspelled_headers,
            self.different_organ_names,
            self.bullet_enumeration_inconsistencies,
            self.organ_mismatch_total,
            self.organ_mismatch_irrelevant,
            self.organ_mismatch_relevant,
        ]
    }

    /// Row labels matching [`AdherenceReport::counts`].
    pub const ROW_LABELS: [&'static str; 6] = [
        "Missing or misspelled headers",
        "Different organ system names",
        "Inconsistencies in bullet/enumeration formatting",
        "Mismatch of mentioned organ systems",
        "of which potentially irrelevant",
        "of which potentially relevant",
    ];

    fn push(&mut self, code: AdherenceCode, line: usize, detail: impl Into<String>) {
        self.flags.push(AdherenceFlag {
            code,
            line,
            detail: detail.into(),
            sample: None,
        });
    }
}

/// Phrases that mark an observation as a negative (normal) finding.
///
/// Patterns are matched case-insensitively at word boundaries anywhere in
/// the observation. `*` matches one to [`NegativeFindingPatterns::WILDCARD_WORDS`]
/// words.
#[derive(Debug, Clone)]
pub struct NegativeFindingPatterns {
    sources: Vec<String>,
    compiled: Vec<Regex>,
}

impl Default for NegativeFindingPatterns {
    fn default() -> Self {
        NegativeFindingPatterns::new(Self::DEFAULT).expect("default patterns compile")
    }
}

impl NegativeFindingPatterns {
    pub const DEFAULT: [&'static str; 6] = [
        "no specific findings reported",
        "no * findings",
        "unremarkable",
        "normal",
        "no acute *",
        "clear",
    ];

    pub const WILDCARD_WORDS: usize = 4;

    pub fn new<I, S>(patterns: I) -> Result<Self, AdherenceError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut sources = Vec::new();
        let mut compiled = Vec::new();
        for pattern in patterns {
            let pattern = pattern.as_ref().trim();
            let body = pattern
                .split_whitespace()
                .map(|w| {
                    if w == "*" {
                        format!(r"\S+(?:\s+\S+){{0,{}}}", Self::WILDCARD_WORDS - 1)
                    } else {
                        regex::escape(w)
                    }
                })
                .collect::<Vec<_>>()
                .join(r"\s+");
            if body.is_empty() {
                return Err(AdherenceError::InvalidPattern {
                    pattern: pattern.to_string(),
                    reason: "empty pattern".into(),
                });
            }
            let re = Regex::new(&format!(r"(?i)(?:^|\b){body}(?:\b|$)")).map_err(|e| {
                AdherenceError::InvalidPattern {
                    pattern: pattern.to_string(),
                    reason: e.to_string(),
                }
            })?;
            sources.push(pattern.to_string());
            compiled.push(re);
        }
        Ok(NegativeFindingPatterns { sources, compiled })
    }

    pub fn patterns(&self) -> &[String] {
        &self.sources
    }

    pub fn matches(&self, observation: &str) -> bool {
        self.compiled.iter().any(|re| re.is_match(observation))
    }
}

/// Number of ordering violations in an impression list. Each item is
/// expected to carry the previous number plus one, starting at 1; a skip,
/// repeat, wrong start or missing number each count once.
pub fn numbering_violations(items: &[ImpressionItem]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut prev: u64 = 0;
    for item in items {
        let expected = prev + 1;
        match item.number_raw {
            Some(n) if n == expected => prev = n,
            Some(n) => {
                out.push((item.line, format!("expected {expected}, found {n}")));
                prev = n;
            }
            None => {
                out.push((item.line, format!("expected {expected}, item is not numbered")));
                prev = expected;
            }
        }
    }
    out
}

/// Counts adherence errors of `hyp`, comparing mentioned organ systems
/// against `reference` when given.
pub fn check_adherence(
    hyp: &StructuredReport,
    reference: Option<&StructuredReport>,
    spec: &TemplateSpec,
    negatives: &NegativeFindingPatterns,
) -> Result<AdherenceReport, AdherenceError> {
    let expected = spec.fingerprint();
    for report in std::iter::once(hyp).chain(reference) {
        if report.spec_fingerprint != expected {
            return Err(AdherenceError::SpecMismatch {
                expected,
                found: report.spec_fingerprint,
            });
        }
    }

    let mut out = AdherenceReport::default();
    for kind in [SectionKind::Findings, SectionKind::Impression] {
        if !hyp.has_section(kind) {
            out.missing_or_misspelled_headers += 1;
            out.push(AdherenceCode::MissingSectionHeader, 0, format!("no '{}:' header", kind.title()));
        }
    }
    for organ in &hyp.findings {
        match organ.header_match {
            HeaderMatch::Misspelled => {
                out.missing_or_misspelled_headers += 1;
                out.push(
                    AdherenceCode::MisspelledOrganHeader,
                    organ.line,
                    format!(
                        "'{}' for '{}'",
                        organ.header_raw,
                        organ.header_canonical.as_deref().unwrap_or_default()
                    ),
                );
            }
            HeaderMatch::Unrecognized => {
                out.different_organ_names += 1;
                out.push(AdherenceCode::DifferentOrganName, organ.line, organ.header_raw.clone());
            }
            HeaderMatch::Exact | HeaderMatch::CaseVariant => {}
        }
        for obs in organ.observations.iter().filter(|o| !o.bulleted) {
            out.bullet_enumeration_inconsistencies += 1;
            out.push(AdherenceCode::UnbulletedObservation, obs.line, obs.text.clone());
        }
    }
    for (line, detail) in numbering_violations(&hyp.impression) {
        out.bullet_enumeration_inconsistencies += 1;
        out.push(AdherenceCode::NumberingInconsistency, line, detail);
    }

    if let Some(reference) = reference {
        let hyp_systems: BTreeSet<&str> = hyp.recognized_systems().map(|(c, _)| c).collect();
        let ref_systems: BTreeSet<&str> = reference.recognized_systems().map(|(c, _)| c).collect();
        let mut one_sided = hyp_systems
            .symmetric_difference(&ref_systems)
            .copied()
            .collect::<Vec<_>>();
        for (_, claimed) in renamed_systems(hyp, reference) {
            one_sided.retain(|s| *s != claimed);
        }
        for system in one_sided {
            let in_hyp = hyp_systems.contains(system);
            let (owner, code) = if in_hyp {
                (hyp, AdherenceCode::SystemOnlyInHypothesis)
            } else {
                (reference, AdherenceCode::SystemOnlyInReference)
            };
            let section = owner.system(system).expect("system taken from this report");
            let irrelevant = section.observations.iter().all(|o| negatives.matches(&o.text));
            out.organ_mismatch_total += 1;
            if irrelevant {
                out.organ_mismatch_irrelevant += 1;
            } else {
                out.organ_mismatch_relevant += 1;
            }
            let line = if in_hyp { section.line } else { 0 };
            let relevance = if irrelevant { "potentially irrelevant" } else { "potentially relevant" };
            out.push(code, line, format!("{system} ({relevance})"));
        }
    }
    Ok(out)
}

fn header_words(header: &str) -> BTreeSet<String> {
    header
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() > 3)
        .map(str::to_lowercase)
        .collect()
}

fn is_renaming(renamed: &OrganSection, canonical: &str, reference: &OrganSection) -> bool {
    !header_words(&renamed.header_raw).is_disjoint(&header_words(canonical))
        || (!renamed.observations.is_empty() && renamed.joined_text() == reference.joined_text())
}

/// Pairs unrecognized hypothesis headers with the reference-only systems
/// they stand in for: a header claims the first such system, in canonical
/// order, that shares a content word with it or carries the same text.
/// Returns (index into `hyp.findings`, canonical header).
pub fn renamed_systems<'r>(hyp: &StructuredReport, reference: &'r StructuredReport) -> Vec<(usize, &'r str)> {
    let hyp_systems: BTreeSet<&str> = hyp.recognized_systems().map(|(c, _)| c).collect();
    let mut open: BTreeSet<&'r str> = reference
        .recognized_systems()
        .map(|(c, _)| c)
        .filter(|c| !hyp_systems.contains(c))
        .collect();
    let mut out = Vec::new();
    for (i, organ) in hyp.findings.iter().enumerate() {
        if organ.header_match != HeaderMatch::Unrecognized {
            continue;
        }
        let claimed = open
            .iter()
            .copied()
            .find(|c| reference.system(c).is_some_and(|section| is_renaming(organ, c, section)));
        if let Some(c) = claimed {
            open.remove(c);
            out.push((i, c));
        }
    }
    out
}

/// Field-wise sum of per-sample reports; flags keep their sample index.
pub fn aggregate_adherence(reports: &[AdherenceReport]) -> Result<AdherenceReport, AdherenceError> {
    if reports.is_empty() {
        return Err(AdherenceError::EmptyList);
    }
    let mut total = AdherenceReport::default();
    for (idx, r) in reports.iter().enumerate() {
        total.absorb(r, idx);
    }
    Ok(total)
}

impl AdherenceReport {
    /// Adds `other` into `self`, tagging its flags with `sample` unless they
    /// already carry an index.
    pub fn absorb(&mut self, other: &AdherenceReport, sample: usize) {
        self.missing_or_misspelled_headers += other.missing_or_misspelled_headers;
        self.different_organ_names += other.different_organ_names;
        self.bullet_enumeration_inconsistencies += other.bullet_enumeration_inconsistencies;
        self.organ_mismatch_total += other.organ_mismatch_total;
        self.organ_mismatch_irrelevant += other.organ_mismatch_irrelevant;
        self.organ_mismatch_relevant += other.organ_mismatch_relevant;
        self.flags.extend(other.flags.iter().cloned().map(|mut f| {
            f.sample.get_or_insert(sample);
            f
        }));
    }
}
