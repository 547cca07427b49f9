// Check a generated report against its reference for template problems:
// misspelled or renamed headers, missing bullets and organ systems that
// appear on only one side.

use radstruct::adherence::{check_adherence, NegativeFindingPatterns};
use radstruct::report::parse_structured_report;
use radstruct::template::TemplateSpec;

const REFERENCE: &str = "\
Findings:
Lungs and Airways:
- No focal consolidation.
Pleura:
- Small left pleural effusion.
Abdominal:
- Unremarkable.
Impression:
1. Small left pleural effusion.
";

const GENERATED: &str = "\
Findings:
Lungs:
- No focal consolidation.
Pleura:
Small left pleural effusion.
Musculoskeletal and Chest Wall:
- Degenerative changes of the spine.
Impression:
1. Small left pleural effusion.
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = TemplateSpec::chest_xray();
    let reference = parse_structured_report(REFERENCE, &spec)?;
    let generated = parse_structured_report(GENERATED, &spec)?;
    let negatives = NegativeFindingPatterns::default();

    let report = check_adherence(&generated, Some(&reference), &spec, &negatives)?;
    for (label, count) in radstruct::AdherenceReport::ROW_LABELS.iter().zip(report.counts()) {
        println!("{label:<50} {count}");
    }
    println!();
    for flag in &report.flags {
        println!("line {:>2}  {:?}: {}", flag.line, flag.code, flag.detail);
    }
    Ok(())
}
