//! Calibration and aggregation schemes.
//!
//! Every scheme reduces to the same two ingredients: a list of calibration
//! points, each with a score and the fitted model it was scored under, and a
//! rule that turns the intervals `F_{score}(x)` of those models at a test
//! point into a prediction set. Split conformal reads one radius off the
//! order statistics; the cross-conformal family (LOO, K-fold, OOB) and the
//! resampling schemes feed the intervals to [`sweep`]; the jackknife+ family
//! ranks their endpoints.
//!
//! Cross-conformal counts calibration scores strictly below the test score,
//! while the resampling p-value counts scores at or above it. Both amount to
//! `y` lying in the closed interval `F_{r_i}(x)`, so one closed-interval
//! sweep serves both.

mod aggregate;
mod cross;
mod oob;
mod sweep;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{aggregated_conformal, resample_bags, Resample};
pub use cross::{kfold_cross, loo_cross};
pub use oob::{oob_calibrate, oob_from_forest, qoob, QoobParams, TreeCount};
pub use sweep::{sweep, SweepInstance};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::family::{response_scale, Family, FamilyKind, LocalFamily};
use crate::forest::{ForestConfig, ForestPredictor, LeafEnsemble, QuantileForest};
use crate::rank::{check_alpha, conformal_quantile, rank_high_from_top, rank_low};
use crate::set::{Interval, PredictionSet, ScoredPoint};

/// Fits a nested family on a training sample.
///
/// Implementations should not depend on the order of the rows, otherwise
/// the cross-conformal guarantees do not apply.
pub trait FamilyBuilder: Sync {
    fn build(&self, train: &Dataset) -> Result<Family>;
}

impl<F> FamilyBuilder for F
where
    F: Fn(&Dataset) -> Result<Family> + Sync,
{
    fn build(&self, train: &Dataset) -> Result<Family> {
        self(train)
    }
}

/// Quantile-forest backed families. Rows are put in canonical order and the
/// forest seed is fixed, so equal training multisets give identical fits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestFamilyBuilder {
    pub kind: FamilyKind,
    pub forest: ForestConfig,
}

impl FamilyBuilder for ForestFamilyBuilder {
    fn build(&self, train: &Dataset) -> Result<Family> {
        let data = train.canonical();
        let forest = QuantileForest::fit(&data, &self.forest)?;
        Family::new(
            self.kind,
            Arc::new(ForestPredictor::new(Arc::new(forest))),
            response_scale(data.targets()),
        )
    }
}

/// Which scheme produced a calibrated predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "split")]
    Split,
    #[serde(rename = "loo-cross")]
    LooCross,
    #[serde(rename = "kfold-cross")]
    KfoldCross,
    #[serde(rename = "jackknife+")]
    JackknifePlus,
    #[serde(rename = "cv+")]
    CvPlus,
    #[serde(rename = "oob-cc")]
    OobCc,
    #[serde(rename = "oob-jp")]
    OobJp,
    #[serde(rename = "qoob")]
    Qoob,
    #[serde(rename = "qoob-jp")]
    QoobJp,
    #[serde(rename = "subsample-agg")]
    SubsampleAgg,
    #[serde(rename = "bootstrap-agg")]
    BootstrapAgg,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Split => "split",
            Method::LooCross => "loo-cross",
            Method::KfoldCross => "kfold-cross",
            Method::JackknifePlus => "jackknife+",
            Method::CvPlus => "cv+",
            Method::OobCc => "oob-cc",
            Method::OobJp => "oob-jp",
            Method::Qoob => "qoob",
            Method::QoobJp => "qoob-jp",
            Method::SubsampleAgg => "subsample-agg",
            Method::BootstrapAgg => "bootstrap-agg",
        }
    }

    /// The interval-valued counterpart of a counting method.
    pub fn jackknife_counterpart(self) -> Option<Method> {
        match self {
            Method::LooCross | Method::JackknifePlus => Some(Method::JackknifePlus),
            Method::KfoldCross | Method::CvPlus => Some(Method::CvPlus),
            Method::OobCc | Method::OobJp => Some(Method::OobJp),
            Method::Qoob | Method::QoobJp => Some(Method::QoobJp),
            _ => None,
        }
    }

    fn is_jackknife(self) -> bool {
        matches!(self, Method::JackknifePlus | Method::CvPlus | Method::OobJp | Method::QoobJp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The three sets a counting scheme can report at a test point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Cross,
    Hull,
    JackknifePlus,
}

#[derive(Debug)]
enum Models {
    Families(Vec<Family>),
    /// Model `i` is the forest restricted to the trees out-of-bag for `i`.
    OutOfBag {
        forest: Arc<QuantileForest>,
        kind: FamilyKind,
        floor: f64,
    },
}

impl Models {
    fn localize(&self, x: &[f64]) -> Vec<LocalFamily> {
        match self {
            Models::Families(fams) => fams.iter().map(|f| f.at(x)).collect(),
            Models::OutOfBag { forest, kind, floor } => {
                let leaves = forest.leaves_at(x);
                forest
                    .oob_map()
                    .iter()
                    .map(|trees| kind.localize(&LeafEnsemble::subset(&leaves, trees), *floor))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CalibrationPoint {
    index: usize,
    model: usize,
    score: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Split { radius: f64 },
    /// Unit weights, threshold `alpha (n + 1) - 1`.
    Counting,
    Weighted { weights: Vec<f64>, threshold: f64 },
}

/// A conformal method bound to its fitted models and calibration scores.
#[derive(Debug, Clone)]
pub struct CalibratedPredictor {
    method: Method,
    alpha: f64,
    n: usize,
    models: Arc<Models>,
    points: Vec<CalibrationPoint>,
    rule: Rule,
}

impl CalibratedPredictor {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Calibration scores in calibration order.
    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.score).collect()
    }

    /// Split-conformal radius, if this is a split predictor.
    pub fn radius(&self) -> Option<f64> {
        match self.rule {
            Rule::Split { radius } => Some(radius),
            _ => None,
        }
    }

    /// Switches a counting method to its jackknife+ style counterpart, which
    /// reuses the same fits and scores.
    pub fn into_jackknife_plus(mut self) -> Result<Self> {
        match self.method.jackknife_counterpart() {
            Some(m) => {
                self.method = m;
                Ok(self)
            }
            None => Err(invalid("method", format!("{} has no jackknife+ counterpart", self.method))),
        }
    }

    /// Score and interval `F_{score}(x)` of every calibration point.
    pub fn scored(&self, x: &[f64]) -> Vec<ScoredPoint> {
        let local = self.models.localize(x);
        self.points
            .iter()
            .map(|p| ScoredPoint {
                index: p.index,
                score: p.score,
                interval_at_score: local[p.model].interval_at(p.score),
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> PredictionSet {
        match &self.rule {
            Rule::Split { radius } => {
                if *radius == f64::INFINITY {
                    return PredictionSet::FullLine;
                }
                let Models::Families(fams) = self.models.as_ref() else {
                    unreachable!("split predictors hold one family")
                };
                fams[0].interval_at(x, *radius).map_or(PredictionSet::Empty, PredictionSet::interval)
            }
            Rule::Counting if self.method.is_jackknife() => {
                jackknife_plus(&self.scored(x), self.alpha, self.n)
            }
            Rule::Counting => sweep(&self.counting_instance(&self.scored(x))),
            Rule::Weighted { weights, threshold } => {
                let mut inst = SweepInstance::new(*threshold);
                for (sp, &w) in self.scored(x).iter().zip(weights) {
                    if let Some(iv) = sp.interval_at_score {
                        inst.push(iv, w);
                    }
                }
                sweep(&inst)
            }
        }
    }

    /// Cross set, its hull, or the jackknife+ interval from the same fits.
    /// Only available for counting methods.
    pub fn predict_aggregate(&self, x: &[f64], aggregate: Aggregate) -> Result<PredictionSet> {
        if self.rule != Rule::Counting {
            return Err(invalid("method", format!("{} is not a counting method", self.method)));
        }
        let scored = self.scored(x);
        Ok(match aggregate {
            Aggregate::Cross => sweep(&self.counting_instance(&scored)),
            Aggregate::Hull => sweep(&self.counting_instance(&scored)).convex_hull(),
            Aggregate::JackknifePlus => jackknife_plus(&scored, self.alpha, self.n),
        })
    }

    /// Predicts every row of `features` in parallel.
    pub fn predict_rows(&self, features: &Dataset) -> Vec<PredictionSet> {
        (0..features.len()).into_par_iter().map(|i| self.predict(features.row(i))).collect()
    }

    fn counting_instance(&self, scored: &[ScoredPoint]) -> SweepInstance {
        SweepInstance::counting(scored.iter().filter_map(|sp| sp.interval_at_score), self.alpha, self.n)
    }
}

/// Split conformal: `F_Q(x)` with `Q` the conformal quantile of the scores
/// of `calibration` under `family`.
pub fn split_calibrate(family: Family, calibration: &Dataset, alpha: f64) -> Result<CalibratedPredictor> {
    check_alpha(alpha)?;
    if calibration.is_empty() {
        return Err(Error::NoCalibrationScores);
    }
    let points: Vec<CalibrationPoint> = (0..calibration.len())
        .into_par_iter()
        .map(|i| CalibrationPoint {
            index: i,
            model: 0,
            score: family.score(calibration.row(i), calibration.target(i)),
        })
        .collect();
    let scores: Vec<f64> = points.iter().map(|p| p.score).collect();
    let radius = conformal_quantile(&scores, alpha)?;
    Ok(CalibratedPredictor {
        method: Method::Split,
        alpha,
        n: calibration.len(),
        models: Arc::new(Models::Families(vec![family])),
        points,
        rule: Rule::Split { radius },
    })
}

/// `[lo, hi]` with `lo` the `floor(alpha (n + 1))`-th smallest left endpoint
/// and `hi` the same rank from the top of the right endpoints, over the
/// calibration points whose interval at `x` is non-empty. Empty when that
/// rank exceeds the number of such points.
pub fn jackknife_plus(scored: &[ScoredPoint], alpha: f64, n: usize) -> PredictionSet {
    let (lows, highs): (Vec<f64>, Vec<f64>) = scored
        .iter()
        .filter_map(|sp| sp.interval_at_score)
        .map(|iv| (iv.lo(), iv.hi()))
        .unzip();
    let (Some(lo), Some(hi)) = (rank_low(&lows, alpha, n), rank_high_from_top(&highs, alpha, n)) else {
        return PredictionSet::Empty;
    };
    Interval::closed(lo, hi).map_or(PredictionSet::Empty, PredictionSet::interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{PointQuery, Predictor};

    struct Constant(f64);

    impl PointQuery for Constant {
        fn mean(&self) -> f64 {
            self.0
        }
        fn spread(&self) -> f64 {
            1.0
        }
        fn quantiles(&self, levels: &[f64]) -> Vec<f64> {
            levels.iter().map(|l| self.0 + l - 0.5).collect()
        }
    }

    struct ConstantPredictor(f64);

    impl Predictor for ConstantPredictor {
        fn query<'a>(&'a self, _x: &'a [f64]) -> Box<dyn PointQuery + 'a> {
            Box::new(Constant(self.0))
        }
    }

    fn constant_family(kind: FamilyKind, c: f64) -> Family {
        Family::new(kind, Arc::new(ConstantPredictor(c)), 1.0).unwrap()
    }

    fn sample(ys: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = ys.iter().map(|_| vec![0.0]).collect();
        Dataset::from_rows(&rows, ys.to_vec()).unwrap()
    }

    #[test]
    fn split_examples() {
        let cal = sample(&[1.0, -2.0, 3.0]);
        let p = split_calibrate(constant_family(FamilyKind::MeanSymmetric, 0.0), &cal, 0.5).unwrap();
        assert_eq!(p.radius(), Some(2.0));
        assert_eq!(p.predict(&[0.0]), PredictionSet::interval(Interval::new(-2.0, 2.0).unwrap()));

        let p = split_calibrate(constant_family(FamilyKind::MeanSymmetric, 0.0), &cal, 0.01).unwrap();
        assert_eq!(p.predict(&[0.0]), PredictionSet::FullLine);

        assert!(matches!(
            split_calibrate(constant_family(FamilyKind::MeanSymmetric, 0.0), &sample(&[]), 0.1),
            Err(Error::NoCalibrationScores)
        ));
    }

    #[test]
    fn split_cqr_with_negative_radius_can_be_empty() {
        // quantiles at 0.25 and 0.75 are -0.25 and 0.25; labels near 0 give negative scores
        let kind = FamilyKind::Cqr { beta: 0.25 };
        let cal = sample(&[0.0, 0.0, 0.0]);
        let p = split_calibrate(constant_family(kind, 0.0), &cal, 0.5).unwrap();
        assert_eq!(p.radius(), Some(-0.25));
        // the interval at radius -0.25 is the single point 0
        assert_eq!(p.predict(&[0.0]), PredictionSet::interval(Interval::new(0.0, 0.0).unwrap()));

        let family = constant_family(kind, 0.0);
        let local = family.at(&[0.0]);
        assert_eq!(local.interval_at(-0.3), None);
    }

    #[test]
    fn jackknife_plus_examples() {
        let scored: Vec<ScoredPoint> = (1..=5)
            .map(|i| ScoredPoint {
                index: i,
                score: 0.0,
                interval_at_score: Interval::closed(i as f64, i as f64 + 1.0),
            })
            .collect();
        assert_eq!(
            jackknife_plus(&scored, 0.4, 5),
            PredictionSet::interval(Interval::new(2.0, 5.0).unwrap())
        );
        assert_eq!(jackknife_plus(&scored[..1], 0.4, 5), PredictionSet::Empty);
    }

    #[test]
    fn jackknife_plus_contains_endpoint_medians() {
        let scored: Vec<ScoredPoint> = [(0.0, 4.0), (1.0, 2.0), (-3.0, 5.0), (2.0, 2.5), (0.5, 9.0)]
            .iter()
            .enumerate()
            .map(|(i, &(l, u))| ScoredPoint {
                index: i,
                score: 0.0,
                interval_at_score: Interval::closed(l, u),
            })
            .collect();
        let set = jackknife_plus(&scored, 0.2, 5);
        assert!(set.contains(0.5) && set.contains(4.0));
    }

    #[test]
    fn jackknife_counterparts() {
        assert_eq!(Method::OobCc.jackknife_counterpart(), Some(Method::OobJp));
        assert_eq!(Method::KfoldCross.jackknife_counterpart(), Some(Method::CvPlus));
        assert_eq!(Method::Split.jackknife_counterpart(), None);
        assert_eq!(serde_json::to_string(&Method::CvPlus).unwrap(), "\"cv+\"");
    }
}
