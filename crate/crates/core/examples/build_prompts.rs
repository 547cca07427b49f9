// Assemble the three prompt variants for a free-text report: the fixed
// instruction template, few-shot examples alone, and both combined.

use radstruct::prompt::{build_icl_prompt, build_prefix_prompt, IclExample, PromptTemplate};
use radstruct::template::TemplateSpec;

const REPORT: &str = "PA and lateral chest. Heart size normal. Lungs clear. No effusion or pneumothorax.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = TemplateSpec::chest_xray();
    let template = PromptTemplate::structuring();
    let examples = vec![
        IclExample::new(
            "ex-1",
            "Mild cardiomegaly. No edema.",
            "Findings:\nCardiovascular:\n- Mild cardiomegaly.\nLungs and Airways:\n- No edema.\n\nImpression:\n1. Mild cardiomegaly.",
            &spec,
        )?,
        IclExample::new(
            "ex-2",
            "Right-sided chest tube in place. Small residual pneumothorax.",
            "Findings:\nTubes, Catheters, and Support Devices:\n- Right chest tube in place.\nPleura:\n- Small residual right pneumothorax.\n\nImpression:\n1. Small residual right pneumothorax.",
            &spec,
        )?,
    ];

    let prefix = build_prefix_prompt(REPORT, &template)?;
    let icl = build_icl_prompt(REPORT, &examples, 2, None)?;
    let both = build_icl_prompt(REPORT, &examples, 1, Some(&template))?;

    println!("prefix prompt: {} bytes, template {}", prefix.len(), template.id());
    println!("icl prompt (k=2): {} bytes", icl.len());
    println!("prefix + icl (k=1): {} bytes\n", both.len());
    println!("{icl}");
    Ok(())
}
