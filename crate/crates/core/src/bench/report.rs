use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchMethod, ExperimentConfig};
use crate::error::{Error, Result};

/// Per-replicate metrics over the test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub replicate: usize,
    /// `inf` when any test point received the whole line.
    #[serde(with = "lenient_f64")]
    pub mean_width: f64,
    pub mean_coverage: f64,
    pub wall_time_ms: Option<f64>,
}

impl ReplicateReport {
    pub fn is_infinite(&self) -> bool {
        !self.mean_width.is_finite()
    }
}

/// Aggregate over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: BenchMethod,
    pub config: ExperimentConfig,
    pub replicates: usize,
    #[serde(with = "lenient_f64")]
    pub ave_mean_width: f64,
    /// Standard error of `ave_mean_width`.
    #[serde(with = "lenient_f64")]
    pub sd_of_average: f64,
    /// Sample standard deviation of the replicate mean widths.
    #[serde(with = "lenient_f64")]
    pub sd_of_replicate_means: f64,
    pub ave_mean_coverage: f64,
    /// Standard error of `ave_mean_coverage`.
    pub sd_of_average_coverage: f64,
    pub flags: Vec<String>,
}

impl Summary {
    pub fn from_reports(config: &ExperimentConfig, reports: &[ReplicateReport]) -> Self {
        let widths: Vec<f64> = reports.iter().map(|r| r.mean_width).collect();
        let coverages: Vec<f64> = reports.iter().map(|r| r.mean_coverage).collect();
        let (ave_mean_width, sd_width) = mean_and_sd(&widths);
        let (ave_mean_coverage, sd_coverage) = mean_and_sd(&coverages);
        let root = (reports.len() as f64).sqrt();
        let flags = reports
            .iter()
            .filter(|r| r.is_infinite())
            .map(|r| format!("infinite-width:replicate-{}", r.replicate))
            .collect();
        Self {
            method: config.method,
            config: config.clone(),
            replicates: reports.len(),
            ave_mean_width,
            sd_of_average: sd_width / root,
            sd_of_replicate_means: sd_width,
            ave_mean_coverage,
            sd_of_average_coverage: sd_coverage / root,
            flags,
        }
    }
}

/// Mean and sample standard deviation; the deviation is 0 for a single
/// value and `inf` when any value is infinite.
fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Writes `replicates.csv` or `replicates.json` plus `summary.json` into
/// `out_dir`, creating it if needed.
pub fn write_reports(
    out_dir: &Path,
    config: &ExperimentConfig,
    reports: &[ReplicateReport],
    format: OutputFormat,
) -> Result<Summary> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    match format {
        OutputFormat::Csv => {
            let path = out_dir.join("replicates.csv");
            let mut writer = csv::Writer::from_path(&path).map_err(|e| Error::Serialization(e.to_string()))?;
            for r in reports {
                writer.serialize(r).map_err(|e| Error::Serialization(e.to_string()))?;
            }
            writer.flush().map_err(io(&path))?;
        }
        OutputFormat::Json => {
            let path = out_dir.join("replicates.json");
            fs::write(&path, to_json(&reports)?).map_err(io(&path))?;
        }
    }
    let summary = Summary::from_reports(config, reports);
    let path = out_dir.join("summary.json");
    fs::write(&path, to_json(&summary)?).map_err(io(&path))?;
    Ok(summary)
}

pub(crate) fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes non-finite floats as the strings `inf`, `-inf` and `nan`, which
/// JSON cannot represent as numbers.
mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
