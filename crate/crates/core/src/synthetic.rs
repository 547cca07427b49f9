//! Seeded generator of templated chest X-ray reports and corpora with
//! controlled deviations. Used by the examples, tests and acceptance suite;
//! the same seed always yields the same text.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ReportPair, Split};
use crate::eval::Dataset;
use crate::template::ORGAN_HEADERS;

/// (negative-finding phrases, positive-finding phrases) per organ header,
/// in template order.
const PHRASES: [(&[&str], &[&str]); 8] = [
    (
        &["The lungs are clear.", "No acute airspace disease.", "Lung parenchyma is unremarkable."],
        &[
            "Mild bibasilar atelectasis.",
            "Patchy right lower lobe consolidation.",
            "Small nodule in the left upper lobe.",
            "Mild pulmonary edema.",
        ],
    ),
    (
        &["No acute pleural abnormality.", "Pleural surfaces are unremarkable.", "Costophrenic angles are clear."],
        &["Small left pleural effusion.", "Trace right pleural effusion.", "Small right apical pneumothorax."],
    ),
    (
        &["Heart size is normal.", "Normal cardiomediastinal silhouette."],
        &["Moderate cardiomegaly.", "Mild enlargement of the cardiac silhouette.", "Calcified aortic knob."],
    ),
    (
        &["Hila are unremarkable.", "Mediastinal contours are normal."],
        &["Right hilar fullness.", "Widened superior mediastinum."],
    ),
    (
        &["No specific findings reported."],
        &[
            "Endotracheal tube terminates 4 cm above the carina.",
            "Right internal jugular catheter tip in the distal SVC.",
            "Nasogastric tube courses below the diaphragm.",
        ],
    ),
    (
        &["Osseous structures are unremarkable.", "No acute osseous abnormality."],
        &["Old healed left rib fracture.", "Degenerative changes of the thoracic spine."],
    ),
    (
        &["Upper abdomen is unremarkable."],
        &["Dilated bowel loops in the upper abdomen.", "Surgical clips in the right upper quadrant."],
    ),
    (
        &["No other specific findings reported."],
        &["Surgical clips project over the left axilla."],
    ),
];

const EXAM_TYPES: [&str; 3] = ["CHEST PA AND LATERAL", "CHEST AP PORTABLE", "CHEST PA"];
const HISTORIES: [&str; 5] = [
    "Shortness of breath.",
    "Cough and fever.",
    "Evaluate for pneumonia.",
    "Chest pain.",
    "Line placement.",
];
const TECHNIQUES: [&str; 2] = ["Frontal and lateral views of the chest.", "Single portable frontal view of the chest."];
const COMPARISONS: [&str; 3] = ["None.", "Prior radiograph from last year.", "Radiograph from two days ago."];
const NO_ACUTE: &str = "No acute cardiopulmonary process.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSystem {
    pub header: String,
    pub observations: Vec<String>,
}

/// A report before rendering, so deviations can be applied structurally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticReport {
    pub exam_type: String,
    pub history: String,
    pub technique: String,
    pub comparison: String,
    pub findings: Vec<SyntheticSystem>,
    pub impression: Vec<String>,
    /// Printed item numbers, parallel to `impression`.
    pub numbering: Vec<u64>,
}

impl SyntheticReport {
    /// Templated text: one header per section, `- ` bullets, numbered
    /// impression.
    pub fn render(&self) -> String {
        let mut out = format!(
            "Exam Type:\n{}\n\nHistory:\n{}\n\nTechnique:\n{}\n\nComparison:\n{}\n\nFindings:\n",
            self.exam_type, self.history, self.technique, self.comparison
        );
        for system in &self.findings {
            out.push_str(&system.header);
            out.push_str(":\n");
            for obs in &system.observations {
                out.push_str("- ");
                out.push_str(obs);
                out.push('\n');
            }
        }
        out.push_str("\nImpression:\n");
        for (n, item) in self.numbering.iter().zip(&self.impression) {
            out.push_str(&format!("{n}. {item}\n"));
        }
        out
    }

    /// Unstructured prose in the style of a dictated report.
    pub fn free_text(&self) -> String {
        let findings: Vec<&str> = self
            .findings
            .iter()
            .flat_map(|s| s.observations.iter().map(String::as_str))
            .collect();
        format!(
            "EXAMINATION: {}. INDICATION: {} TECHNIQUE: {} COMPARISON: {} FINDINGS: {} IMPRESSION: {}",
            self.exam_type,
            self.history,
            self.technique,
            self.comparison,
            findings.join(" "),
            self.impression.join(" ")
        )
    }

    pub fn system_mut(&mut self, header: &str) -> Option<&mut SyntheticSystem> {
        self.findings.iter_mut().find(|s| s.header == header)
    }

    fn renumber(&mut self) {
        self.numbering = (1..=self.impression.len() as u64).collect();
    }
}

pub fn is_negative_phrase(text: &str) -> bool {
    PHRASES.iter().any(|(neg, _)| neg.contains(&text))
}

fn phrases_for(header: &str) -> (&'static [&'static str], &'static [&'static str]) {
    let idx = ORGAN_HEADERS.iter().position(|h| *h == header).unwrap_or(ORGAN_HEADERS.len() - 1);
    PHRASES[idx]
}

pub struct ReportGenerator {
    rng: ChaCha8Rng,
}

impl ReportGenerator {
    pub fn new(seed: u64) -> Self {
        ReportGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn pick(&mut self, pool: &[&str]) -> String {
        pool.choose(&mut self.rng).expect("non-empty pool").to_string()
    }

    fn observations(&mut self, header: &str) -> Vec<String> {
        let (neg, pos) = phrases_for(header);
        let n = self.rng.gen_range(1..=2);
        let mut out: Vec<String> = Vec::with_capacity(n);
        while out.len() < n {
            let pool = if self.rng.gen_bool(0.35) { pos } else { neg };
            let phrase = self.pick(pool);
            if !out.contains(&phrase) {
                out.push(phrase);
            }
        }
        out
    }

    /// A report containing exactly `headers`, in the given order.
    pub fn report_with(&mut self, headers: &[&str]) -> SyntheticReport {
        let findings: Vec<SyntheticSystem> = headers
            .iter()
            .map(|h| SyntheticSystem {
                header: h.to_string(),
                observations: self.observations(h),
            })
            .collect();
        let mut impression: Vec<String> = findings
            .iter()
            .flat_map(|s| s.observations.iter())
            .filter(|o| !is_negative_phrase(o))
            .take(3)
            .cloned()
            .collect();
        if impression.is_empty() {
            impression.push(NO_ACUTE.to_string());
        }
        let mut report = SyntheticReport {
            exam_type: self.pick(&EXAM_TYPES),
            history: self.pick(&HISTORIES),
            technique: self.pick(&TECHNIQUES),
            comparison: self.pick(&COMPARISONS),
            findings,
            impression,
            numbering: Vec::new(),
        };
        report.renumber();
        report
    }

    /// A canonical report with 3 to 8 organ systems in template order.
    pub fn report(&mut self) -> SyntheticReport {
        let headers: Vec<&str> = ORGAN_HEADERS
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < 3 || self.rng.gen_bool(0.4))
            .map(|(_, h)| *h)
            .collect();
        self.report_with(&headers)
    }

    /// A plausible generated counterpart of `reference` carrying at most one
    /// deviation.
    pub fn hypothesis(&mut self, reference: &SyntheticReport) -> SyntheticReport {
        let mut hyp = reference.clone();
        match self.rng.gen_range(0..10) {
            0..=2 => {}
            3 => {
                let i = self.rng.gen_range(0..hyp.findings.len());
                let header = hyp.findings[i].header.clone();
                let (neg, pos) = phrases_for(&header);
                let j = self.rng.gen_range(0..hyp.findings[i].observations.len());
                let pool = if is_negative_phrase(&hyp.findings[i].observations[j]) { neg } else { pos };
                hyp.findings[i].observations[j] = self.pick(pool);
            }
            4 if hyp.findings.len() > 1 => {
                let i = self.rng.gen_range(0..hyp.findings.len());
                hyp.findings.remove(i);
            }
            5 => {
                let missing: Vec<&str> = ORGAN_HEADERS
                    .iter()
                    .copied()
                    .filter(|h| hyp.findings.iter().all(|s| s.header != *h))
                    .collect();
                if let Some(h) = missing.choose(&mut self.rng).copied() {
                    let observations = self.observations(h);
                    hyp.findings.push(SyntheticSystem {
                        header: h.to_string(),
                        observations,
                    });
                }
            }
            6 => {
                if let Some(s) = hyp.system_mut("Lungs and Airways") {
                    s.header = "Lungs".into();
                }
            }
            7 => {
                let i = self.rng.gen_range(0..hyp.findings.len());
                hyp.findings[i].header = hyp.findings[i].header.to_uppercase();
            }
            8 => {
                if let Some(last) = hyp.numbering.last_mut() {
                    *last += 1;
                }
            }
            _ => {
                hyp.impression.reverse();
            }
        }
        hyp
    }
}

/// Corpus of `mimic` test pairs followed by `chexpert` validation pairs,
/// each with a generated hypothesis.
pub fn synthetic_corpus(seed: u64, mimic: usize, chexpert: usize) -> Vec<ReportPair> {
    let mut generator = ReportGenerator::new(seed);
    let plan = std::iter::repeat_n((Dataset::Mimic, Split::Test, "mimic"), mimic)
        .chain(std::iter::repeat_n((Dataset::CheXpert, Split::Validation, "chexpert"), chexpert));
    let mut counters = [0usize; 2];
    plan.map(|(source, split, prefix)| {
        let c = &mut counters[usize::from(source == Dataset::CheXpert)];
        *c += 1;
        let reference = generator.report();
        let hypothesis = generator.hypothesis(&reference);
        ReportPair {
            id: format!("{prefix}-{:04}", *c),
            source,
            split,
            free_text: reference.free_text(),
            structured_reference: reference.render(),
            structured_hypothesis: Some(hypothesis.render()),
            model_id: Some("synthetic".into()),
        }
    })
    .collect()
}

/// Corpus where the hypothesis equals the reference.
pub fn identity_corpus(seed: u64, n: usize) -> Vec<ReportPair> {
    let mut generator = ReportGenerator::new(seed);
    (1..=n)
        .map(|i| {
            let r = generator.report();
            let text = r.render();
            ReportPair {
                id: format!("copy-{i:04}"),
                source: if i % 2 == 0 { Dataset::CheXpert } else { Dataset::Mimic },
                split: Split::Test,
                free_text: r.free_text(),
                structured_reference: text.clone(),
                structured_hypothesis: Some(text),
                model_id: None,
            }
        })
        .collect()
}

/// Deviations deliberately placed into an injected corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InjectionManifest {
    pub misspelled_headers: u64,
    pub renamed_systems: u64,
    pub numbering_skips: u64,
    pub mismatches_irrelevant: u64,
    pub mismatches_relevant: u64,
}

impl InjectionManifest {
    pub fn mismatches(&self) -> u64 {
        self.mismatches_irrelevant + self.mismatches_relevant
    }
}

/// Ten pairs carrying 3 misspelled headers, 2 renamed systems, 4 numbering
/// skips and 5 one-sided systems (2 with only negative findings). Returns
/// the pairs and the manifest tallied while injecting.
pub fn injected_corpus(seed: u64) -> (Vec<ReportPair>, InjectionManifest) {
    let mut generator = ReportGenerator::new(seed);
    let mut manifest = InjectionManifest::default();
    let base = ["Lungs and Airways", "Pleura", "Cardiovascular", "Hila and Mediastinum", "Abdominal"];
    let positive = |header: &str| phrases_for(header).1[0].to_string();
    let negative = |header: &str| phrases_for(header).0[0].to_string();
    let mut pairs = Vec::with_capacity(10);
    for i in 0..10 {
        let mut reference = generator.report_with(&base);
        let mut hyp = reference.clone();
        match i {
            0 => {
                hyp.system_mut("Pleura").unwrap().header = "Pleurra".into();
                manifest.misspelled_headers += 1;
            }
            1 => {
                hyp.system_mut("Cardiovascular").unwrap().header = "Cardiovasculr".into();
                manifest.misspelled_headers += 1;
            }
            2 => {
                hyp.system_mut("Abdominal").unwrap().header = "Abdominl".into();
                manifest.misspelled_headers += 1;
                hyp.impression.push(NO_ACUTE.into());
                hyp.renumber();
                *hyp.numbering.last_mut().unwrap() += 1;
                manifest.numbering_skips += 1;
            }
            3 => {
                hyp.system_mut("Lungs and Airways").unwrap().header = "Lungs".into();
                manifest.renamed_systems += 1;
            }
            4 => {
                hyp.system_mut("Hila and Mediastinum").unwrap().header = "Mediastinum".into();
                manifest.renamed_systems += 1;
            }
            5 => {
                // 1, 3, 5: two skips
                hyp.impression = vec!["First.".into(), "Second.".into(), "Third.".into()];
                hyp.numbering = vec![1, 3, 5];
                reference.impression = hyp.impression.clone();
                reference.renumber();
                manifest.numbering_skips += 2;
            }
            6 => {
                hyp.impression.push(NO_ACUTE.into());
                hyp.renumber();
                for n in hyp.numbering.iter_mut().skip(1) {
                    *n += 1;
                }
                manifest.numbering_skips += 1;
            }
            7 => {
                reference.system_mut("Hila and Mediastinum").unwrap().observations = vec![negative("Hila and Mediastinum")];
                reference.system_mut("Pleura").unwrap().observations = vec![positive("Pleura")];
                hyp = reference.clone();
                hyp.findings.retain(|s| s.header != "Hila and Mediastinum" && s.header != "Pleura");
                manifest.mismatches_irrelevant += 1;
                manifest.mismatches_relevant += 1;
            }
            8 => {
                for header in ["Musculoskeletal and Chest Wall", "Tubes, Catheters, and Support Devices"] {
                    let observations = if header.starts_with("Musculo") {
                        vec![negative(header)]
                    } else {
                        vec![positive(header)]
                    };
                    hyp.findings.push(SyntheticSystem {
                        header: header.into(),
                        observations,
                    });
                }
                manifest.mismatches_irrelevant += 1;
                manifest.mismatches_relevant += 1;
            }
            _ => {
                reference.system_mut("Cardiovascular").unwrap().observations = vec![positive("Cardiovascular")];
                hyp = reference.clone();
                hyp.findings.retain(|s| s.header != "Cardiovascular");
                manifest.mismatches_relevant += 1;
            }
        }
        pairs.push(ReportPair {
            id: format!("inject-{i:02}"),
            source: Dataset::Mimic,
            split: Split::Test,
            free_text: reference.free_text(),
            structured_reference: reference.render(),
            structured_hypothesis: Some(hyp.render()),
            model_id: Some("injected".into()),
        });
    }
    (pairs, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adherence::NegativeFindingPatterns;
    use crate::report::{parse_structured_report, serialize_report};
    use crate::template::{HeaderMatch, TemplateSpec};

    #[test]
    fn phrase_polarity_matches_patterns() {
        let neg = NegativeFindingPatterns::default();
        for (negatives, positives) in PHRASES {
            for p in negatives {
                assert!(neg.matches(p), "{p}");
            }
            for p in positives {
                assert!(!neg.matches(p), "{p}");
            }
        }
    }

    #[test]
    fn rendered_reports_are_canonical() {
        let spec = TemplateSpec::chest_xray();
        let mut g = ReportGenerator::new(7);
        for _ in 0..20 {
            let text = g.report().render();
            let parsed = parse_structured_report(&text, &spec).unwrap();
            assert!(parsed.flags.is_empty(), "{text}");
            assert!(parsed.findings.iter().all(|o| o.header_match == HeaderMatch::Exact));
            assert_eq!(serialize_report(&parsed, &spec), text);
        }
    }

    #[test]
    fn seeded_and_sized() {
        let a = synthetic_corpus(3, 5, 4);
        assert_eq!(a, synthetic_corpus(3, 5, 4));
        assert_eq!(a.len(), 9);
        assert_eq!(a[5].id, "chexpert-0001");
        assert_ne!(a, synthetic_corpus(4, 5, 4));
    }

    #[test]
    fn manifest_tallies() {
        let (pairs, m) = injected_corpus(1);
        assert_eq!(pairs.len(), 10);
        assert_eq!(
            m,
            InjectionManifest {
                misspelled_headers: 3,
                renamed_systems: 2,
                numbering_skips: 4,
                mismatches_irrelevant: 2,
                mismatches_relevant: 3,
            }
        );
    }
}
