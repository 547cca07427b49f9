// Compare per-sample time, cost and CO2 of the bundled reference models,
// then turn a set of measured durations into a record of its own.

use radstruct::cost::{comparison_table, compare_training, measure_run, reference_records, CostMode, RateConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = reference_records();
    for mode in [CostMode::SingleSample, CostMode::Batch] {
        println!("{mode:?}");
        for row in comparison_table(&records, "lightweight", mode)? {
            println!(
                "  {:>12} / {:<12} time x{:<8.2} cost x{:<8.2} co2 x{:.2}",
                row.target_id, row.baseline_id, row.ratio_time, row.ratio_cost, row.ratio_co2
            );
        }
    }

    let training = compare_training(&records[0], &records[2])?;
    println!("\ntraining: {training:?}");

    let rates = RateConfig {
        currency_per_gpu_hour: Some(2.5),
        grams_co2_per_kwh: Some(380.0),
        watts_per_gpu: Some(350.0),
    };
    let durations = [2.8, 3.4, 3.0, 3.3, 2.9];
    let measured = measure_run("my-model", &durations, None, &rates, 1)?;
    println!(
        "\nmeasured: {:.2} s, ${:.5}, {:.4} g CO2 per sample",
        measured.inference_seconds_per_sample, measured.inference_cost_per_sample, measured.inference_co2_g_per_sample
    );
    Ok(())
}
