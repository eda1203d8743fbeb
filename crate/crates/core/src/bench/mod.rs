//! Replicate benchmark harness.
//!
//! Each replicate draws `train + test` rows without replacement from a pool,
//! fits and calibrates one method on the training rows, and records the mean
//! width and mean coverage of its prediction sets over the test rows.

mod dataset;
mod report;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use dataset::{load_dataset, synthetic_sample};
pub use report::{write_reports, OutputFormat, ReplicateReport, Summary};
pub use run::{run_replicate, run_replicates};

use crate::error::{invalid, Error, Result};

/// Methods exposed by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMethod {
    /// Split conformal, forest mean, symmetric sets.
    Sc,
    /// Split conformal, forest quantiles at `beta` and `1 - beta`.
    SplitCqr,
    /// K-fold cross-conformal, forest mean refit per fold.
    KfoldCc,
    /// Out-of-bag cross-conformal, symmetric sets around the OOB mean.
    OobCc,
    /// Out-of-bag cross-conformal, sets scaled by the OOB spread.
    OobNcc,
    /// Out-of-bag cross-conformal with quantile sets.
    Qoob,
    /// Jackknife+ interval of the QOOB fits.
    QoobJp,
    /// Convex hull of the QOOB set.
    QoobConv,
    /// Averaged split p-values over subsamples of half the training set.
    SubsampleAgg,
    /// Averaged split p-values over bootstrap bags.
    BootstrapAgg,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 10] = [
        BenchMethod::Sc,
        BenchMethod::SplitCqr,
        BenchMethod::KfoldCc,
        BenchMethod::OobCc,
        BenchMethod::OobNcc,
        BenchMethod::Qoob,
        BenchMethod::QoobJp,
        BenchMethod::QoobConv,
        BenchMethod::SubsampleAgg,
        BenchMethod::BootstrapAgg,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            BenchMethod::Sc => "sc",
            BenchMethod::SplitCqr => "split-cqr",
            BenchMethod::KfoldCc => "kfold-cc",
            BenchMethod::OobCc => "oob-cc",
            BenchMethod::OobNcc => "oob-ncc",
            BenchMethod::Qoob => "qoob",
            BenchMethod::QoobJp => "qoob-jp",
            BenchMethod::QoobConv => "qoob-conv",
            BenchMethod::SubsampleAgg => "subsample-agg",
            BenchMethod::BootstrapAgg => "bootstrap-agg",
        }
    }

    fn uses_quantiles(self) -> bool {
        matches!(
            self,
            BenchMethod::SplitCqr | BenchMethod::Qoob | BenchMethod::QoobJp | BenchMethod::QoobConv
        )
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| invalid("method", format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Where replicate rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Numeric CSV with a header, target in the last column.
    Csv(PathBuf),
    /// A pool of this many synthetic points generated from the master seed.
    Synthetic(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: Option<DataSource>,
    pub method: BenchMethod,
    pub alpha: f64,
    pub trees: usize,
    /// Nominal quantile level; `None` means `2 * alpha`.
    pub beta: Option<f64>,
    /// Folds for `kfold-cc`, resamples for the aggregated methods.
    pub k: usize,
    pub replicates: usize,
    pub train: usize,
    pub test: usize,
    pub min_leaf: usize,
    pub seed: u64,
    /// Record wall-clock time per replicate. Off by default because timings
    /// make otherwise identical runs differ.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: None,
            method: BenchMethod::Qoob,
            alpha: 0.1,
            trees: 100,
            beta: None,
            k: 8,
            replicates: 100,
            train: 768,
            test: 232,
            min_leaf: 5,
            seed: 0,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    /// Rows drawn per replicate.
    pub fn subsample_size(&self) -> usize {
        self.train + self.test
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(2.0 * self.alpha)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_none() {
            return Err(Error::Config("no dataset or synthetic source given".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("{} is outside (0, 1)", self.alpha)));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "need at least one replicate"));
        }
        if self.train < 2 || self.test == 0 {
            return Err(invalid("train", "need at least 2 training and 1 test row"));
        }
        if self.trees == 0 {
            return Err(invalid("trees", "need at least one tree"));
        }
        if self.method.uses_quantiles() {
            let beta = self.beta();
            if !(beta > 0.0 && beta <= 0.5) {
                return Err(invalid("beta", format!("{beta} is outside (0, 1/2]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_tags_round_trip() {
        for m in BenchMethod::ALL {
            assert_eq!(m.tag().parse::<BenchMethod>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.tag()));
        }
        assert!("cqr".parse::<BenchMethod>().is_err());
    }

    #[test]
    fn toml_overrides_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            method = "split-cqr"
            alpha = 0.2
            source = { synthetic = 500 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.method, BenchMethod::SplitCqr);
        assert_eq!(cfg.source, Some(DataSource::Synthetic(500)));
        assert_eq!(cfg.trees, 100);
        assert!((cfg.beta() - 0.4).abs() < 1e-15);
        assert!(toml::from_str::<ExperimentConfig>("tress = 3").is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig {
            source: Some(DataSource::Synthetic(100)),
            ..Default::default()
        };
        assert!(ok.validate().is_ok());
        assert!(ExperimentConfig::default().validate().is_err());
        assert!(ExperimentConfig { alpha: 0.3, ..ok.clone() }.validate().is_err());
        assert!(ExperimentConfig { replicates: 0, ..ok }.validate().is_err());
    }
}
