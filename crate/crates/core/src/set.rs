//! Prediction sets on the real line.
//!
//! A [`PredictionSet`] is a finite union of disjoint closed intervals, the
//! empty set, or the whole line. Every method in this crate reports its
//! output through this type so that widths and coverage are measured the
//! same way everywhere.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[lo, hi]`. Endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Builds `[lo, hi]`, rejecting `lo > hi` and NaN endpoints.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        Self::closed(lo, hi).ok_or(Error::InvalidInterval { lo, hi })
    }

    /// Builds `[lo, hi]`, or `None` when the formula describes an empty set.
    pub fn closed(lo: f64, hi: f64) -> Option<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            None
        } else {
            Some(Self { lo, hi })
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        if self.lo == self.hi {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    /// `true` when `self` lies inside `other`.
    pub fn is_within(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// A finite union of disjoint closed intervals.
///
/// The `Union` variant is kept sorted by `lo` with pairwise disjoint,
/// non-touching members. Build it through [`PredictionSet::from_intervals`],
/// which merges overlaps and collapses `[-inf, inf]` to `FullLine`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredictionSet {
    Empty,
    FullLine,
    Union(Vec<Interval>),
}

impl PredictionSet {
    pub fn interval(iv: Interval) -> Self {
        Self::from_intervals([iv])
    }

    /// Normalizes an arbitrary collection of closed intervals.
    pub fn from_intervals<I: IntoIterator<Item = Interval>>(intervals: I) -> Self {
        let mut ivs: Vec<Interval> = intervals.into_iter().collect();
        if ivs.is_empty() {
            return Self::Empty;
        }
        ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        if merged.len() == 1 && merged[0].lo == f64::NEG_INFINITY && merged[0].hi == f64::INFINITY {
            return Self::FullLine;
        }
        Self::Union(merged)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Self::Empty)
    }

    /// Lebesgue measure of the set.
    pub fn width(&self) -> f64 {
        match self {
            Self::Empty => 0.0,
            Self::FullLine => f64::INFINITY,
            Self::Union(ivs) => ivs.iter().map(Interval::width).sum(),
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        match self {
            Self::Empty => false,
            Self::FullLine => true,
            Self::Union(ivs) => {
                // first interval with hi >= y
                let idx = ivs.partition_point(|iv| iv.hi < y);
                ivs.get(idx).is_some_and(|iv| iv.lo <= y)
            }
        }
    }

    /// The member intervals; `FullLine` is reported as `[-inf, inf]`.
    pub fn intervals(&self) -> Vec<Interval> {
        match self {
            Self::Empty => Vec::new(),
            Self::FullLine => vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
            Self::Union(ivs) => ivs.clone(),
        }
    }

    /// Smallest interval containing the set.
    pub fn convex_hull(&self) -> Self {
        match self {
            Self::Empty => Self::Empty,
            Self::FullLine => Self::FullLine,
            Self::Union(ivs) => {
                let lo = ivs[0].lo;
                let hi = ivs[ivs.len() - 1].hi;
                Self::from_intervals([Interval { lo, hi }])
            }
        }
    }

    pub fn is_subset_of(&self, other: &PredictionSet) -> bool {
        match (self, other) {
            (Self::Empty, _) | (_, Self::FullLine) => true,
            (_, Self::Empty) => false,
            (Self::FullLine, Self::Union(_)) => false,
            (Self::Union(mine), Self::Union(theirs)) => mine.iter().all(|iv| {
                let idx = theirs.partition_point(|t| t.hi < iv.hi);
                theirs.get(idx).is_some_and(|t| iv.is_within(t))
            }),
        }
    }
}

impl fmt::Display for PredictionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "{{}}"),
            Self::FullLine => write!(f, "(-inf, inf)"),
            Self::Union(ivs) => {
                for (i, iv) in ivs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " U ")?;
                    }
                    write!(f, "{iv}")?;
                }
                Ok(())
            }
        }
    }
}

/// One training point's contribution at a fixed test feature vector: its
/// calibration score and the nested set evaluated at that score.
///
/// `interval_at_score` is `None` exactly when the set is empty, i.e. the
/// point does not take part in the aggregation at this test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPoint {
    pub index: usize,
    pub score: f64,
    pub interval_at_score: Option<Interval>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn inverted_interval_is_rejected() {
        assert!(matches!(
            Interval::new(2.0, 1.0),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(Interval::closed(f64::NAN, 1.0).is_none());
        assert!(Interval::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn widths() {
        let ps = PredictionSet::from_intervals([iv(2.0, 4.0), iv(0.0, 1.0)]);
        assert_eq!(ps.width(), 3.0);
        assert_eq!(PredictionSet::Empty.width(), 0.0);
        assert_eq!(PredictionSet::FullLine.width(), f64::INFINITY);
        let half = PredictionSet::from_intervals([iv(f64::NEG_INFINITY, 0.0)]);
        assert_eq!(half.width(), f64::INFINITY);
    }

    #[test]
    fn merging_overlaps_and_touching_ends() {
        let ps = PredictionSet::from_intervals([iv(3.0, 5.0), iv(0.0, 1.0), iv(1.0, 2.0), iv(4.0, 4.5)]);
        assert_eq!(ps, PredictionSet::Union(vec![iv(0.0, 2.0), iv(3.0, 5.0)]));
        let full = PredictionSet::from_intervals([
            iv(f64::NEG_INFINITY, 1.0),
            iv(0.0, f64::INFINITY),
        ]);
        assert_eq!(full, PredictionSet::FullLine);
        assert_eq!(PredictionSet::from_intervals([]), PredictionSet::Empty);
    }

    #[test]
    fn membership_and_hull() {
        let ps = PredictionSet::from_intervals([iv(0.0, 1.0), iv(2.0, 4.0)]);
        assert!(ps.contains(0.0));
        assert!(ps.contains(1.0));
        assert!(!ps.contains(1.5));
        assert!(ps.contains(4.0));
        assert!(!ps.contains(4.1));
        assert_eq!(ps.convex_hull(), PredictionSet::interval(iv(0.0, 4.0)));
        assert!(ps.is_subset_of(&ps.convex_hull()));
        assert!(!ps.convex_hull().is_subset_of(&ps));
        assert!(PredictionSet::Empty.is_subset_of(&ps));
        assert!(ps.is_subset_of(&PredictionSet::FullLine));
        assert!(!PredictionSet::FullLine.is_subset_of(&ps));
    }

    #[test]
    fn degenerate_point_interval() {
        let ps = PredictionSet::from_intervals([iv(1.0, 1.0)]);
        assert!(ps.contains(1.0));
        assert_eq!(ps.width(), 0.0);
    }
}
