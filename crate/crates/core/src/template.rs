//! Template vocabulary for structured chest X-ray reports.
//!
//! A [`TemplateSpec`] fixes the six report sections, the eight organ-system
//! headers allowed inside Findings, the bullet marker used for observations
//! and the numbering style of Impression items. Every parser, validator and
//! scorer in this crate takes the template explicitly so that a report can only
//! be compared against reports parsed under the same vocabulary.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six top-level sections of the report template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SectionKind {
    ExamType,
    History,
    Technique,
    Comparison,
    Findings,
    Impression,
}

impl SectionKind {
    pub const ALL: [SectionKind; 6] = [
        SectionKind::ExamType,
        SectionKind::History,
        SectionKind::Technique,
        SectionKind::Comparison,
        SectionKind::Findings,
        SectionKind::Impression,
    ];

    /// Title-cased header text, without the colon.
    pub fn title(self) -> &'static str {
        match self {
            SectionKind::ExamType => "Exam Type",
            SectionKind::History => "History",
            SectionKind::Technique => "Technique",
            SectionKind::Comparison => "Comparison",
            SectionKind::Findings => "Findings",
            SectionKind::Impression => "Impression",
        }
    }

    /// Case-insensitive lookup by header text.
    pub fn from_title(title: &str) -> Option<SectionKind> {
        let title = title.trim();
        SectionKind::ALL
            .into_iter()
            .find(|kind| kind.title().eq_ignore_ascii_case(title))
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown section name: {0}")]
pub struct UnknownSection(pub String);

impl FromStr for SectionKind {
    type Err = UnknownSection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionKind::from_title(s).ok_or_else(|| UnknownSection(s.to_string()))
    }
}

/// Organ-system headers accepted inside the Findings section, in template order.
pub const ORGAN_HEADERS: [&str; 8] = [
    "Lungs and Airways",
    "Pleura",
    "Cardiovascular",
    "Hila and Mediastinum",
    "Tubes, Catheters, and Support Devices",
    "Musculoskeletal and Chest Wall",
    "Abdominal",
    "Other",
];

/// How a written organ header relates to the canonical vocabulary.
///
/// Variants are listed in precedence order: a header is classified by the
/// first variant that applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeaderMatch {
    /// Byte-equal to a canonical header.
    Exact,
    /// Equal to a canonical header ignoring case.
    CaseVariant,
    /// Within the misspelling distance of exactly one canonical header.
    Misspelled,
    /// Anything else, including near-ties between two canonical headers.
    Unrecognized,
}

impl HeaderMatch {
    pub fn is_recognized(self) -> bool {
        !matches!(self, HeaderMatch::Unrecognized)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("section list must be exactly {expected:?}")]
    SectionOrder { expected: Vec<SectionKind> },
    #[error("duplicate organ header (case-insensitive): {0}")]
    DuplicateOrganHeader(String),
    #[error("organ header list is empty")]
    NoOrganHeaders,
    #[error("bullet marker must be non-empty")]
    EmptyBulletMarker,
}

/// Canonical section and organ-system vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    sections: Vec<SectionKind>,
    organ_headers: Vec<String>,
    bullet_marker: String,
    numbering_style: String,
    /// Maximum case-insensitive edit distance for a header to count as a
    /// misspelling of a canonical one.
    misspelling_distance: usize,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec::chest_xray()
    }
}

impl TemplateSpec {
    /// The chest X-ray template: six sections, eight organ systems, `- `
    /// bullets and `<n>. ` numbered impressions.
    pub fn chest_xray() -> TemplateSpec {
        TemplateSpec {
            sections: SectionKind::ALL.to_vec(),
            organ_headers: ORGAN_HEADERS.iter().map(|h| h.to_string()).collect(),
            bullet_marker: "- ".to_string(),
            numbering_style: "<n>. ".to_string(),
            misspelling_distance: 2,
        }
    }

    /// Builds a spec with a custom organ vocabulary. Sections are fixed.
    pub fn with_organ_headers<I, S>(headers: I) -> Result<TemplateSpec, TemplateError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let spec = TemplateSpec {
            organ_headers: headers.into_iter().map(Into::into).collect(),
            ..TemplateSpec::chest_xray()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.sections != SectionKind::ALL {
            return Err(TemplateError::SectionOrder {
                expected: SectionKind::ALL.to_vec(),
            });
        }
        if self.organ_headers.is_empty() {
            return Err(TemplateError::NoOrganHeaders);
        }
        if self.bullet_marker.trim().is_empty() {
            return Err(TemplateError::EmptyBulletMarker);
        }
        let mut seen: Vec<String> = Vec::with_capacity(self.organ_headers.len());
        for header in &self.organ_headers {
            let folded = header.to_lowercase();
            if seen.contains(&folded) {
                return Err(TemplateError::DuplicateOrganHeader(header.clone()));
            }
            seen.push(folded);
        }
        Ok(())
    }

    pub fn sections(&self) -> &[SectionKind] {
        &self.sections
    }

    pub fn organ_headers(&self) -> &[String] {
        &self.organ_headers
    }

    pub fn bullet_marker(&self) -> &str {
        &self.bullet_marker
    }

    pub fn numbering_style(&self) -> &str {
        &self.numbering_style
    }

    pub fn misspelling_distance(&self) -> usize {
        self.misspelling_distance
    }

    /// Position of a canonical header in the vocabulary.
    pub fn organ_index(&self, canonical: &str) -> Option<usize> {
        self.organ_headers.iter().position(|h| h == canonical)
    }

    /// Classifies a written organ header (colon already removed).
    ///
    /// Returns the canonical header for every match except `Unrecognized`.
    pub fn classify_header(&self, raw: &str) -> (HeaderMatch, Option<&str>) {
        let raw = raw.trim();
        if let Some(h) = self.organ_headers.iter().find(|h| h.as_str() == raw) {
            return (HeaderMatch::Exact, Some(h));
        }
        let folded = raw.to_lowercase();
        if let Some(h) = self.organ_headers.iter().find(|h| h.to_lowercase() == folded) {
            return (HeaderMatch::CaseVariant, Some(h));
        }
        let mut within = self
            .organ_headers
            .iter()
            .filter(|h| strsim::levenshtein(&h.to_lowercase(), &folded) <= self.misspelling_distance);
        match (within.next(), within.next()) {
            (Some(h), None) => (HeaderMatch::Misspelled, Some(h)),
            _ => (HeaderMatch::Unrecognized, None),
        }
    }

    /// Stable 64-bit fingerprint of the vocabulary (FNV-1a over the
    /// canonical strings). Reports carry it so mixing specs is detectable.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                hash ^= u64::from(*b);
                hash = hash.wrapping_mul(PRIME);
            }
            hash ^= 0xff;
            hash = hash.wrapping_mul(PRIME);
        };
        for section in &self.sections {
            feed(section.title().as_bytes());
        }
        for header in &self.organ_headers {
            feed(header.as_bytes());
        }
        feed(self.bullet_marker.as_bytes());
        feed(self.numbering_style.as_bytes());
        feed(&self.misspelling_distance.to_le_bytes());
        hash
    }
}
