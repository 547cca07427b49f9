// Evaluate a synthetic corpus end to end: per-sample scores for all six
// metrics (model-based ones via the mock scorer), per-dataset summary
// rows and the pooled means.

use radstruct::eval::{aggregate_results, EvalConfig, Evaluator, SampleInput};
use radstruct::lexical::MetricId;
use radstruct::scorer::{ClientConfig, MockScorer, ScorerClient};
use radstruct::synthetic::synthetic_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synthetic_corpus(7, 20, 10);
    let cfg = EvalConfig::default();
    let client = ScorerClient::new(MockScorer::new(), ClientConfig::default());
    let evaluator = Evaluator::new(&cfg, Some(&client));
    evaluator.check_metrics(&MetricId::ALL)?;

    let mut results = Vec::new();
    for pair in &corpus {
        let Some(hypothesis) = pair.structured_hypothesis.as_deref() else { continue };
        let sample = SampleInput {
            sample_id: &pair.id,
            dataset: pair.source,
            hypothesis,
            reference: &pair.structured_reference,
        };
        match evaluator.evaluate_sample(sample, &MetricId::ALL) {
            Ok(r) => results.push(r),
            Err(e) => eprintln!("{}: {e}", pair.id),
        }
    }

    let summary = aggregate_results(&results)?;
    for row in summary.rows.iter().chain(&summary.pooled) {
        println!("{:<6} {:<12} n={:<3} {:>5.1}", row.group_label(), row.metric.as_str(), row.samples, row.mean * 100.0);
    }
    Ok(())
}
