// Score one generated report section by section with the in-process
// lexical metrics, under both averaging modes.

use radstruct::eval::{score_findings, score_impression, AveragingMode, NativeMetric};
use radstruct::report::parse_structured_report;
use radstruct::template::TemplateSpec;

const REFERENCE: &str = "\
Findings:
Lungs and Airways:
- Mild bibasilar atelectasis.
Pleura:
- No pleural effusion.
Cardiovascular:
- Heart size is normal.
Impression:
1. Mild bibasilar atelectasis.
";

const GENERATED: &str = "\
Findings:
Lungs and Airways:
- Mild atelectasis at both bases.
Cardiovascular:
- Heart size is normal.
Impression:
1. Mild bibasilar atelectasis.
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = TemplateSpec::chest_xray();
    let reference = parse_structured_report(REFERENCE, &spec)?;
    let generated = parse_structured_report(GENERATED, &spec)?;

    for metric in [NativeMetric::bleu(), NativeMetric::rouge_l()] {
        for averaging in [AveragingMode::Union, AveragingMode::Reference] {
            let findings = score_findings(&generated, &reference, &metric, averaging)?;
            println!("{:?} findings ({averaging:?}): {:.3}", metric.id, findings.value);
            for (system, score) in &findings.per_system {
                println!("    {system:<22} {:.3}", score.value);
            }
            if !findings.penalized_systems.is_empty() {
                println!("    one-sided: {:?}", findings.penalized_systems);
            }
        }
        let impression = score_impression(&generated, &reference, &metric)?;
        println!("{:?} impression: {:.3}\n", metric.id, impression.value);
    }
    Ok(())
}
