// Parse a structured chest X-ray report, inspect its organ sections and
// print the canonical rendering.

use radstruct::report::{parse_structured_report, serialize_report};
use radstruct::template::TemplateSpec;

const REPORT: &str = "\
EXAM TYPE: Chest radiograph, PA and lateral
HISTORY: Cough for two weeks.
Findings:
Lungs and Airways:
- Patchy opacity in the right lower lobe.
Pleura:
- No pleural effusion.
Cardiovasculr:
- Normal heart size.
Impression:
1. Right lower lobe pneumonia.
2. No effusion.
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = TemplateSpec::chest_xray();
    let report = parse_structured_report(REPORT, &spec)?;

    for system in &report.findings {
        println!(
            "{:<22} -> {:<22} ({:?}, {} observation(s))",
            system.header_raw,
            system.header_canonical.as_deref().unwrap_or("?"),
            system.header_match,
            system.observations.len()
        );
    }
    for item in &report.impression {
        println!("impression {:?}: {}", item.number_raw, item.text);
    }
    for flag in &report.flags {
        println!("line {}: {:?} {}", flag.line, flag.code, flag.detail);
    }

    println!("\n{}", serialize_report(&report, &spec));
    Ok(())
}
