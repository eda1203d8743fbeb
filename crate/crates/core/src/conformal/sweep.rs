use crate::set::{Interval, PredictionSet};

/// Absolute tolerance for comparing weight sums against the threshold.
pub(crate) const SWEEP_TOL: f64 = 1e-9;

/// Weighted closed intervals and a threshold. The set it describes is
/// `{y : sum of weights of intervals containing y > threshold}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepInstance {
    entries: Vec<(Interval, f64)>,
    threshold: f64,
}

impl SweepInstance {
    pub fn new(threshold: f64) -> Self {
        Self {
            entries: Vec::new(),
            threshold,
        }
    }

    /// Unit weights with threshold `alpha (n + 1) - 1`: the set of labels
    /// covered by at least `floor(alpha (n + 1))` intervals.
    pub fn counting<I: IntoIterator<Item = Interval>>(intervals: I, alpha: f64, n: usize) -> Self {
        let mut inst = Self::new(alpha * (n as f64 + 1.0) - 1.0);
        for iv in intervals {
            inst.push(iv, 1.0);
        }
        inst
    }

    pub fn push(&mut self, interval: Interval, weight: f64) {
        debug_assert!(weight > 0.0);
        self.entries.push((interval, weight));
    }

    pub fn entries(&self) -> &[(Interval, f64)] {
        &self.entries
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Weight of the intervals containing `y`, summed directly.
    pub fn coverage_at(&self, y: f64) -> f64 {
        self.entries.iter().filter(|(iv, _)| iv.contains(y)).map(|(_, w)| w).sum()
    }
}

/// Solves the stabbing condition in `O(E log E)`.
///
/// Endpoints are visited in increasing order with left endpoints ahead of
/// right endpoints at equal values, so touching intervals both count at the
/// shared point.
pub fn sweep(instance: &SweepInstance) -> PredictionSet {
    let threshold = instance.threshold;
    if threshold < -SWEEP_TOL {
        return PredictionSet::FullLine;
    }
    let mut events: Vec<(f64, bool, f64)> = Vec::with_capacity(2 * instance.entries.len());
    for &(iv, w) in &instance.entries {
        // adding 0.0 maps -0.0 to 0.0, which total_cmp would otherwise order first
        events.push((iv.lo() + 0.0, true, w));
        events.push((iv.hi() + 0.0, false, w));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));

    let mut out = Vec::new();
    let mut sum = 0.0;
    let mut start = None;
    for (value, is_left, w) in events {
        if is_left {
            sum += w;
            if start.is_none() && sum > threshold + SWEEP_TOL {
                start = Some(value);
            }
        } else {
            sum -= w;
            if let Some(lo) = start {
                if sum <= threshold + SWEEP_TOL {
                    out.extend(Interval::closed(lo, value));
                    start = None;
                }
            }
        }
    }
    PredictionSet::from_intervals(out)
}
