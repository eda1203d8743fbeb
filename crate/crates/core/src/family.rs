//! Nested interval families.
//!
//! A fitted family maps a feature vector `x` and a radius `t` to a closed set
//! `F_t(x)` that grows with `t`. The nonconformity score of a label is the
//! smallest radius whose set captures it:
//!
//! ```text
//! score(x, y) = inf { t : y in F_t(x) }
//! ```
//!
//! All families here produce intervals (or the empty set), so both views are
//! available in closed form. Evaluation is split in two steps: [`Family::at`]
//! queries the underlying regressor once at `x` and returns a [`LocalFamily`],
//! which then answers `score` and `interval_at` without touching the model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::set::Interval;

/// Levels of the fixed quantile grid used by the distributional family.
pub const DISTRIBUTIONAL_LEVELS: usize = 99;

/// Relative floor applied to scales and denominators.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Estimates of a fitted regressor at one feature vector.
pub trait PointQuery {
    fn mean(&self) -> f64;
    fn spread(&self) -> f64;
    /// Conditional quantiles at each of `levels` (each in `[0, 1]`).
    fn quantiles(&self, levels: &[f64]) -> Vec<f64>;
}

/// A fitted regressor answering point queries.
pub trait Predictor: Send + Sync {
    fn query<'a>(&'a self, x: &'a [f64]) -> Box<dyn PointQuery + 'a>;
}

/// Which nested shape to build around the regressor's estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `[mu - t, mu + t]`, `t >= 0`.
    MeanSymmetric,
    /// `[mu - t sigma, mu + t sigma]`, `t >= 0`.
    MeanScaled,
    /// `[q_beta - t, q_{1-beta} + t]`, `t` real.
    Cqr { beta: f64 },
    /// `(1 + t)[q_beta, q_{1-beta}] - t q_{1/2}`, `t` real.
    CqrMedian { beta: f64 },
    /// `[q_beta, q_{1-beta}] +- t (q_{1-beta} - q_beta)`, `t > -1/2`.
    CqrRange { beta: f64 },
    /// `[q_{1/2 - t}, q_{1/2 + t}]`, `0 <= t < 1/2`, on a 99-level grid.
    Distributional,
}

impl FamilyKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FamilyKind::Cqr { beta } | FamilyKind::CqrMedian { beta } | FamilyKind::CqrRange { beta } => {
                if beta > 0.0 && beta < 0.5 || beta == 0.5 {
                    Ok(())
                } else {
                    Err(invalid("beta", format!("{beta} is outside (0, 1/2]")))
                }
            }
            _ => Ok(()),
        }
    }

    /// Closure of the radius domain.
    pub fn radius_domain(&self) -> (f64, f64) {
        match self {
            FamilyKind::MeanSymmetric | FamilyKind::MeanScaled => (0.0, f64::INFINITY),
            FamilyKind::Cqr { .. } | FamilyKind::CqrMedian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::CqrRange { .. } => (-0.5, f64::INFINITY),
            FamilyKind::Distributional => (0.0, 0.5),
        }
    }

    /// Queries `q` for the estimates this kind needs. `floor` is the absolute
    /// lower bound for scales and denominators.
    pub fn localize(&self, q: &dyn PointQuery, floor: f64) -> LocalFamily {
        match *self {
            FamilyKind::MeanSymmetric => LocalFamily::Symmetric { center: q.mean() },
            FamilyKind::MeanScaled => LocalFamily::Scaled {
                center: q.mean(),
                scale: q.spread().max(floor),
            },
            FamilyKind::Cqr { beta } => {
                let qs = q.quantiles(&[beta, 1.0 - beta]);
                let (lo, hi) = ordered(qs[0], qs[1]);
                LocalFamily::Quantile { lo, hi }
            }
            FamilyKind::CqrMedian { beta } => {
                let qs = q.quantiles(&[beta, 0.5, 1.0 - beta]);
                LocalFamily::median(qs[0], qs[1], qs[2], floor)
            }
            FamilyKind::CqrRange { beta } => {
                let qs = q.quantiles(&[beta, 1.0 - beta]);
                LocalFamily::range(qs[0], qs[1], floor)
            }
            FamilyKind::Distributional => {
                let levels: Vec<f64> = (1..=DISTRIBUTIONAL_LEVELS).map(|i| i as f64 / 100.0).collect();
                LocalFamily::distributional(q.quantiles(&levels), floor)
            }
        }
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A nested family evaluated at one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalFamily {
    Symmetric { center: f64 },
    Scaled { center: f64, scale: f64 },
    Quantile { lo: f64, hi: f64 },
    /// `[lo - t * below, hi + t * above]`, where `below = med - lo` and
    /// `above = hi - med` (each floored).
    Median { lo: f64, hi: f64, below: f64, above: f64 },
    Range { lo: f64, hi: f64, width: f64 },
    Distributional(QuantileGrid),
}

impl LocalFamily {
    pub fn median(q_lo: f64, q_med: f64, q_hi: f64, floor: f64) -> Self {
        let (lo, hi) = ordered(q_lo, q_hi);
        let med = q_med.clamp(lo, hi);
        LocalFamily::Median {
            lo,
            hi,
            below: (med - lo).max(floor),
            above: (hi - med).max(floor),
        }
    }

    pub fn range(q_lo: f64, q_hi: f64, floor: f64) -> Self {
        let (lo, hi) = ordered(q_lo, q_hi);
        LocalFamily::Range {
            lo,
            hi,
            width: (hi - lo).max(floor),
        }
    }

    pub fn distributional(quantiles: Vec<f64>, floor: f64) -> Self {
        LocalFamily::Distributional(QuantileGrid::new(quantiles, floor))
    }

    /// Smallest radius whose set contains `y`.
    pub fn score(&self, y: f64) -> f64 {
        match *self {
            LocalFamily::Symmetric { center } => (y - center).abs(),
            LocalFamily::Scaled { center, scale } => (y - center).abs() / scale,
            LocalFamily::Quantile { lo, hi } => (lo - y).max(y - hi),
            LocalFamily::Median { lo, hi, below, above } => ((lo - y) / below).max((y - hi) / above),
            LocalFamily::Range { lo, hi, width } => ((lo - y) / width).max((y - hi) / width),
            LocalFamily::Distributional(ref grid) => grid.score(y),
        }
    }

    /// The set at radius `t`; `None` when it is empty.
    pub fn interval_at(&self, t: f64) -> Option<Interval> {
        match *self {
            LocalFamily::Symmetric { center } => Interval::closed(center - t, center + t),
            LocalFamily::Scaled { center, scale } => Interval::closed(center - t * scale, center + t * scale),
            LocalFamily::Quantile { lo, hi } => Interval::closed(lo - t, hi + t),
            LocalFamily::Median { lo, hi, below, above } => Interval::closed(lo - t * below, hi + t * above),
            LocalFamily::Range { lo, hi, width } => Interval::closed(lo - t * width, hi + t * width),
            LocalFamily::Distributional(ref grid) => grid.interval_at(t),
        }
    }
}

/// Piecewise-linear quantile function on the levels `0.01, ..., 0.99`,
/// extended beyond the outermost levels by tails that reach the whole line
/// as the radius approaches `1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    values: Vec<f64>,
    tail_scale: f64,
}

const GRID_STEP: f64 = 0.01;
const MEDIAN_INDEX: usize = 49;
/// Radius at which the grid runs out (levels 0.01 and 0.99).
const GRID_EDGE: f64 = 0.49;

impl QuantileGrid {
    fn new(mut values: Vec<f64>, floor: f64) -> Self {
        assert_eq!(values.len(), DISTRIBUTIONAL_LEVELS, "quantile grid needs 99 levels");
        // crossing estimates are repaired by a running maximum
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        let tail_scale = (values[DISTRIBUTIONAL_LEVELS - 1] - values[0]).max(floor);
        Self { values, tail_scale }
    }

    /// Interpolated quantile at grid position `pos` in `[0, 98]`.
    fn at_position(&self, pos: f64) -> f64 {
        let pos = pos.clamp(0.0, (DISTRIBUTIONAL_LEVELS - 1) as f64);
        let i = pos.floor() as usize;
        if i >= DISTRIBUTIONAL_LEVELS - 1 {
            return self.values[DISTRIBUTIONAL_LEVELS - 1];
        }
        let frac = pos - i as f64;
        if frac == 0.0 {
            return self.values[i];
        }
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    fn tail(&self, t: f64) -> f64 {
        self.tail_scale * (t - GRID_EDGE) / (0.5 - t)
    }

    fn tail_inverse(&self, distance: f64) -> f64 {
        (0.5 * distance + GRID_EDGE * self.tail_scale) / (distance + self.tail_scale)
    }

    fn interval_at(&self, t: f64) -> Option<Interval> {
        if t.is_nan() || t < 0.0 {
            return None;
        }
        if t >= 0.5 {
            return Interval::closed(f64::NEG_INFINITY, f64::INFINITY);
        }
        if t <= GRID_EDGE {
            let offset = t / GRID_STEP;
            let lo = self.at_position(MEDIAN_INDEX as f64 - offset);
            let hi = self.at_position(MEDIAN_INDEX as f64 + offset);
            return Interval::closed(lo, hi);
        }
        let g = self.tail(t);
        Interval::closed(self.values[0] - g, self.values[DISTRIBUTIONAL_LEVELS - 1] + g)
    }

    fn score(&self, y: f64) -> f64 {
        let median = self.values[MEDIAN_INDEX];
        let first = self.values[0];
        let last = self.values[DISTRIBUTIONAL_LEVELS - 1];
        if y < first {
            return self.tail_inverse(first - y);
        }
        if y > last {
            return self.tail_inverse(y - last);
        }
        if y >= median {
            // smallest position p >= 49 with Q(p) >= y
            let mut j = MEDIAN_INDEX;
            while self.values[j] < y {
                j += 1;
            }
            if j == MEDIAN_INDEX {
                return 0.0;
            }
            let (a, b) = (self.values[j - 1], self.values[j]);
            let pos = (j - 1) as f64 + (y - a) / (b - a);
            (pos - MEDIAN_INDEX as f64) * GRID_STEP
        } else {
            // largest position p <= 49 with Q(p) <= y
            let mut j = MEDIAN_INDEX;
            while self.values[j] > y {
                j -= 1;
            }
            let (a, b) = (self.values[j], self.values[j + 1]);
            let pos = j as f64 + (y - a) / (b - a);
            (MEDIAN_INDEX as f64 - pos) * GRID_STEP
        }
    }
}

/// A nested family bound to a fitted regressor.
#[derive(Clone)]
pub struct Family {
    kind: FamilyKind,
    predictor: Arc<dyn Predictor>,
    floor: f64,
}

impl std::fmt::Debug for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Family")
            .field("kind", &self.kind)
            .field("floor", &self.floor)
            .finish_non_exhaustive()
    }
}

impl Family {
    /// `response_scale` sets the floor for spreads and widths
    /// (`1e-8 * response_scale`).
    pub fn new(kind: FamilyKind, predictor: Arc<dyn Predictor>, response_scale: f64) -> Result<Self> {
        kind.validate()?;
        let scale = if response_scale.is_finite() && response_scale > 0.0 {
            response_scale
        } else {
            1.0
        };
        Ok(Self {
            kind,
            predictor,
            floor: SCALE_FLOOR * scale,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn at(&self, x: &[f64]) -> LocalFamily {
        let q = self.predictor.query(x);
        self.kind.localize(q.as_ref(), self.floor)
    }

    pub fn score(&self, x: &[f64], y: f64) -> f64 {
        self.at(x).score(y)
    }

    pub fn interval_at(&self, x: &[f64], t: f64) -> Option<Interval> {
        self.at(x).interval_at(t)
    }
}

/// Spread of a response vector used to scale numeric floors.
pub fn response_scale(y: &[f64]) -> f64 {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}
