//! Order-statistic rules shared by the calibration schemes.
//!
//! Ranks are 1-based. `alpha * (n + 1)` is rounded with a small slack so that
//! products which are integers in exact arithmetic (e.g. `0.1 * 10`) do not
//! drift across an integer boundary in floating point.

use crate::error::{invalid, Error, Result};

const RANK_SLACK: f64 = 1e-9;

/// `floor(alpha * (n + 1))`.
pub fn lower_rank(alpha: f64, n: usize) -> usize {
    (alpha * (n as f64 + 1.0) + RANK_SLACK).floor().max(0.0) as usize
}

/// `ceil((1 - alpha) * (n + 1))`.
pub fn upper_rank(alpha: f64, n: usize) -> usize {
    ((1.0 - alpha) * (n as f64 + 1.0) - RANK_SLACK).ceil().max(0.0) as usize
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} is outside [0, 1]")))
    }
}

/// The `k`-th smallest element (1-based) of `values`. `k` must be in range.
pub(crate) fn kth_smallest(values: &[f64], k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= values.len());
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

/// Split-conformal radius: the `ceil((1 - alpha)(m + 1))`-th smallest score,
/// or `+inf` when that rank exceeds `m`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::NoCalibrationScores);
    }
    check_alpha(alpha)?;
    let k = upper_rank(alpha, scores.len());
    if k > scores.len() {
        return Ok(f64::INFINITY);
    }
    Ok(kth_smallest(scores, k.max(1)))
}

/// Jackknife+ style lower endpoint: the `floor(alpha(n + 1))`-th smallest of
/// `values`, where `n` is the full training size.
///
/// Returns `None` when the rank exceeds `values.len()` (the set is empty) and
/// `-inf` when the rank is zero.
pub fn rank_low(values: &[f64], alpha: f64, n: usize) -> Option<f64> {
    let k = lower_rank(alpha, n);
    if k == 0 {
        Some(f64::NEG_INFINITY)
    } else if k > values.len() {
        None
    } else {
        Some(kth_smallest(values, k))
    }
}

/// Jackknife+ style upper endpoint: the `ceil((1 - alpha)(n + 1))`-th
/// smallest of `values`, or `+inf` when the rank exceeds `values.len()`.
pub fn rank_high(values: &[f64], alpha: f64, n: usize) -> f64 {
    let k = upper_rank(alpha, n);
    if k > values.len() {
        f64::INFINITY
    } else if k == 0 {
        f64::NEG_INFINITY
    } else {
        kth_smallest(values, k)
    }
}

/// Upper endpoint as the `floor(alpha(n + 1))`-th largest of `values`.
///
/// Coincides with [`rank_high`] when `values.len() == n`; when some training
/// points drop out it stays anchored to the largest values instead of
/// drifting towards `+inf`.
pub fn rank_high_from_top(values: &[f64], alpha: f64, n: usize) -> Option<f64> {
    let k = lower_rank(alpha, n);
    if k == 0 {
        Some(f64::INFINITY)
    } else if k > values.len() {
        None
    } else {
        Some(kth_smallest(values, values.len() + 1 - k))
    }
}
