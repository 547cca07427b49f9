// Drive the scoring-service client against the in-process mock, including
// chunking into wire batches and recovery from transient failures.

use std::time::Duration;

use radstruct::scorer::{ClientConfig, FaultPlan, MockScorer, ScoreRequest, ScorerClient, TextPair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs: Vec<TextPair> = (0..10)
        .map(|i| TextPair::new(format!("p{i}"), "small left pleural effusion", "left pleural effusion"))
        .collect();
    let request = ScoreRequest::new("F1_RadGraph", pairs);

    let mock = MockScorer::new().with_faults(FaultPlan {
        transient_first: 1,
        ..FaultPlan::default()
    });
    let config = ClientConfig {
        max_batch: 4,
        backoff_base: Duration::from_millis(5),
        ..ClientConfig::default()
    };
    let client = ScorerClient::new(mock, config);

    println!("metrics: {:?}", client.capabilities()?.metric_ids);
    let response = client.score_batch(&request)?;
    println!("{} scores from {} ({} wire calls)", response.scores.len(), response.scorer_version, client.wire_calls());
    for s in response.scores.iter().take(3) {
        println!("  {} {:.3}", s.pair_id, s.value);
    }
    Ok(())
}
