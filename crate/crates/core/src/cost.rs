//! Training and inference cost records, their measurement from timings,
//! and ratio comparisons between models.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Published reference figures for the lightweight model and two LLaMA-3
/// sizes. The parenthesised variants are the batch-processing figures for
/// the lightweight model and the four-GPU figures for the 70B model.
pub const REFERENCE_COSTS_CSV: &str = include_str!("../assets/reference_costs.csv");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("no durations given")]
    NoDurations,
    #[error("negative or non-finite duration {0}")]
    InvalidDuration(f64),
    #[error("rate config lacks {0}")]
    MissingRate(&'static str),
    #[error("baseline '{model}' has zero {field}")]
    DivisionByZero { model: String, field: &'static str },
    #[error("'{model}' has no {field}")]
    MissingField { model: String, field: &'static str },
    #[error("record '{model}': {reason}")]
    InvalidRecord { model: String, reason: String },
    #[error("unknown model id '{0}'")]
    UnknownModel(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for CostError {
    fn from(e: csv::Error) -> Self {
        CostError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunCostRecord {
    pub model_id: String,
    #[serde(rename = "# Parameters")]
    pub parameter_count: u64,
    #[serde(rename = "Training time [h]")]
    pub training_hours: Option<f64>,
    #[serde(rename = "Training CO2 eq. [kg]")]
    pub training_co2_kg: Option<f64>,
    #[serde(rename = "Time [s]")]
    pub inference_seconds_per_sample: f64,
    #[serde(rename = "Time batch [s]")]
    pub inference_seconds_batch: Option<f64>,
    #[serde(rename = "Cost [$]")]
    pub inference_cost_per_sample: f64,
    #[serde(rename = "Cost batch [$]")]
    pub inference_cost_batch: Option<f64>,
    #[serde(rename = "CO2 eq. [g]")]
    pub inference_co2_g_per_sample: f64,
    #[serde(rename = "CO2 eq. batch [g]")]
    pub inference_co2_g_batch: Option<f64>,
    pub gpu_count: u32,
    pub notes: String,
}

impl RunCostRecord {
    pub fn validate(&self) -> Result<(), CostError> {
        let invalid = |reason: String| CostError::InvalidRecord {
            model: self.model_id.clone(),
            reason,
        };
        let singles = [
            ("time", self.inference_seconds_per_sample, self.inference_seconds_batch),
            ("cost", self.inference_cost_per_sample, self.inference_cost_batch),
            ("CO2", self.inference_co2_g_per_sample, self.inference_co2_g_batch),
        ];
        for (name, single, batch) in singles {
            if !(single.is_finite() && single >= 0.0) {
                return Err(invalid(format!("{name} {single} is negative")));
            }
            if let Some(b) = batch {
                if !(b.is_finite() && b >= 0.0) || b > single {
                    return Err(invalid(format!("batch {name} {b} must lie in [0, {single}]")));
                }
            }
        }
        for v in [self.training_hours, self.training_co2_kg].into_iter().flatten() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("training figure {v} is negative")));
            }
        }
        Ok(())
    }
}

/// Pricing and carbon intensity used to turn timings into costs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConfig {
    pub currency_per_gpu_hour: Option<f64>,
    pub grams_co2_per_kwh: Option<f64>,
    /// Needed only when no energy measurement is supplied.
    pub watts_per_gpu: Option<f64>,
}

/// Builds a record from per-sample wall-clock durations. Without a
/// measured `energy_kwh`, energy is estimated as `watts × gpus × hours`.
pub fn measure_run(
    model_id: &str,
    durations: &[f64],
    energy_kwh: Option<f64>,
    rates: &RateConfig,
    gpu_count: u32,
) -> Result<RunCostRecord, CostError> {
    if durations.is_empty() {
        return Err(CostError::NoDurations);
    }
    if let Some(&bad) = durations.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(CostError::InvalidDuration(bad));
    }
    let rate = rates.currency_per_gpu_hour.ok_or(CostError::MissingRate("currency_per_gpu_hour"))?;
    let intensity = rates.grams_co2_per_kwh.ok_or(CostError::MissingRate("grams_co2_per_kwh"))?;
    let n = durations.len() as f64;
    let total_seconds: f64 = durations.iter().sum();
    let mean = total_seconds / n;
    let gpus = f64::from(gpu_count);
    let energy = match energy_kwh {
        Some(e) => e,
        None => {
            let watts = rates.watts_per_gpu.ok_or(CostError::MissingRate("watts_per_gpu"))?;
            watts * gpus * total_seconds / 3600.0 / 1000.0
        }
    };
    Ok(RunCostRecord {
        model_id: model_id.to_string(),
        parameter_count: 0,
        training_hours: None,
        training_co2_kg: None,
        inference_seconds_per_sample: mean,
        inference_seconds_batch: None,
        inference_cost_per_sample: mean * gpus * rate / 3600.0,
        inference_cost_batch: None,
        inference_co2_g_per_sample: energy * intensity / n,
        inference_co2_g_batch: None,
        gpu_count,
        notes: format!("measured over {} samples", durations.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CostMode {
    #[default]
    SingleSample,
    /// Uses the batch variant where present, else the single-sample figure.
    Batch,
}

impl std::str::FromStr for CostMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "single" | "singlesample" => Ok(CostMode::SingleSample),
            "batch" => Ok(CostMode::Batch),
            _ => Err(format!("unknown cost mode '{s}'")),
        }
    }
}

/// Target ÷ baseline for each inference quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub baseline_id: String,
    pub target_id: String,
    pub mode: CostMode,
    pub ratio_time: f64,
    pub ratio_cost: f64,
    pub ratio_co2: f64,
}

/// Target ÷ baseline for the training quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingComparison {
    pub baseline_id: String,
    pub target_id: String,
    pub ratio_training_time: f64,
    pub ratio_training_co2: f64,
}

fn ratio(baseline: &RunCostRecord, field: &'static str, b: f64, t: f64) -> Result<f64, CostError> {
    if b == 0.0 {
        return Err(CostError::DivisionByZero {
            model: baseline.model_id.clone(),
            field,
        });
    }
    Ok(t / b)
}

fn inference_in_mode(r: &RunCostRecord, mode: CostMode) -> [f64; 3] {
    match mode {
        CostMode::SingleSample => [
            r.inference_seconds_per_sample,
            r.inference_cost_per_sample,
            r.inference_co2_g_per_sample,
        ],
        CostMode::Batch => [
            r.inference_seconds_batch.unwrap_or(r.inference_seconds_per_sample),
            r.inference_cost_batch.unwrap_or(r.inference_cost_per_sample),
            r.inference_co2_g_batch.unwrap_or(r.inference_co2_g_per_sample),
        ],
    }
}

pub fn compare_costs(baseline: &RunCostRecord, target: &RunCostRecord, mode: CostMode) -> Result<CostComparison, CostError> {
    let [bt, bc, bg] = inference_in_mode(baseline, mode);
    let [tt, tc, tg] = inference_in_mode(target, mode);
    Ok(CostComparison {
        baseline_id: baseline.model_id.clone(),
        target_id: target.model_id.clone(),
        mode,
        ratio_time: ratio(baseline, "time", bt, tt)?,
        ratio_cost: ratio(baseline, "cost", bc, tc)?,
        ratio_co2: ratio(baseline, "CO2", bg, tg)?,
    })
}

pub fn compare_training(baseline: &RunCostRecord, target: &RunCostRecord) -> Result<TrainingComparison, CostError> {
    let need = |r: &RunCostRecord, v: Option<f64>, field| {
        v.ok_or_else(|| CostError::MissingField {
            model: r.model_id.clone(),
            field,
        })
    };
    let bh = need(baseline, baseline.training_hours, "training time")?;
    let th = need(target, target.training_hours, "training time")?;
    let bc = need(baseline, baseline.training_co2_kg, "training CO2")?;
    let tc = need(target, target.training_co2_kg, "training CO2")?;
    Ok(TrainingComparison {
        baseline_id: baseline.model_id.clone(),
        target_id: target.model_id.clone(),
        ratio_training_time: ratio(baseline, "training time", bh, th)?,
        ratio_training_co2: ratio(baseline, "training CO2", bc, tc)?,
    })
}

pub fn read_records(reader: impl Read) -> Result<Vec<RunCostRecord>, CostError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let record: RunCostRecord = row?;
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

pub fn reference_records() -> Vec<RunCostRecord> {
    read_records(REFERENCE_COSTS_CSV.as_bytes()).expect("packaged cost table is valid")
}

pub fn write_records(records: &[RunCostRecord], writer: impl Write) -> Result<(), CostError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CostError::Csv(e.to_string()))
}

/// One output row of the `costs` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub baseline_id: String,
    pub target_id: String,
    pub mode: CostMode,
    pub ratio_time: f64,
    pub ratio_cost: f64,
    pub ratio_co2: f64,
    pub ratio_training_time: Option<f64>,
    pub ratio_training_co2: Option<f64>,
}

/// Compares every record against `baseline_id`, in record order.
pub fn comparison_table(records: &[RunCostRecord], baseline_id: &str, mode: CostMode) -> Result<Vec<ComparisonRow>, CostError> {
    let baseline = records
        .iter()
        .find(|r| r.model_id == baseline_id)
        .ok_or_else(|| CostError::UnknownModel(baseline_id.to_string()))?;
    records
        .iter()
        .map(|target| {
            let c = compare_costs(baseline, target, mode)?;
            let training = compare_training(baseline, target).ok();
            Ok(ComparisonRow {
                baseline_id: c.baseline_id,
                target_id: c.target_id,
                mode,
                ratio_time: c.ratio_time,
                ratio_cost: c.ratio_cost,
                ratio_co2: c.ratio_co2,
                ratio_training_time: training.as_ref().map(|t| t.ratio_training_time),
                ratio_training_co2: training.as_ref().map(|t| t.ratio_training_co2),
            })
        })
        .collect()
}

pub fn write_comparisons(rows: &[ComparisonRow], writer: impl Write) -> Result<(), CostError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CostError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_id(id: &str) -> RunCostRecord {
        reference_records().into_iter().find(|r| r.model_id == id).unwrap()
    }

    #[test]
    fn packaged_table_loads() {
        let recs = reference_records();
        let ids: Vec<_> = recs.iter().map(|r| r.model_id.as_str()).collect();
        assert_eq!(ids, ["lightweight", "llama-3-3b", "llama-3-70b"]);
        assert_eq!(recs[0].inference_seconds_per_sample, 3.1);
        assert_eq!(recs[2].inference_cost_batch, Some(0.21));
        assert_eq!(recs[1].parameter_count, 3_210_000_000);
    }

    #[test]
    fn seventy_b_ratios() {
        let c = compare_costs(&by_id("lightweight"), &by_id("llama-3-70b"), CostMode::SingleSample).unwrap();
        assert!((c.ratio_time - 1260.0 / 3.1).abs() < 1e-9);
        assert!((c.ratio_cost - 1.76 / 0.0043).abs() < 1e-9);
        assert!((c.ratio_co2 - 67.7 / 0.075).abs() < 1e-9);
    }

    #[test]
    fn batch_mode_falls_back() {
        let c = compare_costs(&by_id("lightweight"), &by_id("llama-3-3b"), CostMode::Batch).unwrap();
        assert!((c.ratio_time - 10.7 / 0.16).abs() < 1e-9);
    }

    #[test]
    fn measure_matches_lightweight_row() {
        let rate = 0.0043 * 3600.0 / 3.1;
        let rates = RateConfig {
            currency_per_gpu_hour: Some(rate),
            grams_co2_per_kwh: Some(400.0),
            watts_per_gpu: Some(300.0),
        };
        let r = measure_run("lw", &[3.1; 10], None, &rates, 1).unwrap();
        assert!((r.inference_cost_per_sample - 0.0043).abs() < 1e-12);
        let r = measure_run("z", &[0.0, 0.0], None, &rates, 1).unwrap();
        assert_eq!((r.inference_cost_per_sample, r.inference_co2_g_per_sample), (0.0, 0.0));
        assert_eq!(measure_run("m", &[1.0, 3.0], Some(0.0), &rates, 1).unwrap().inference_seconds_per_sample, 2.0);
        assert_eq!(
            measure_run("m", &[1.0], None, &RateConfig::default(), 1),
            Err(CostError::MissingRate("currency_per_gpu_hour"))
        );
    }

    #[test]
    fn zero_baseline_rejected() {
        let mut b = by_id("lightweight");
        b.inference_cost_per_sample = 0.0;
        b.inference_cost_batch = None;
        assert!(matches!(
            compare_costs(&b, &by_id("llama-3-3b"), CostMode::SingleSample),
            Err(CostError::DivisionByZero { field: "cost", .. })
        ));
    }

    #[test]
    fn table_rows_and_unknown_baseline() {
        let recs = reference_records();
        let rows = comparison_table(&recs, "lightweight", CostMode::SingleSample).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].ratio_time, rows[0].ratio_cost, rows[0].ratio_co2), (1.0, 1.0, 1.0));
        assert!(matches!(comparison_table(&recs, "gpt", CostMode::Batch), Err(CostError::UnknownModel(_))));
        let mut out = Vec::new();
        write_comparisons(&rows, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("baseline_id,target_id,mode,"));
    }
}
