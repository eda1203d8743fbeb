//! C ABI over the nested-conformal library.
//!
//! Objects cross the boundary as opaque handles created by `nc_*_new` or
//! `nc_*_fit` and released by the matching `nc_*_free`. Every fallible call
//! returns an [`NcStatus`]; outputs are written through pointer arguments
//! only on success. Prediction sets are written as `lo, hi` pairs into a
//! caller-owned buffer.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nested_conformal::conformal::{
    oob_calibrate, qoob, split_calibrate, sweep, CalibratedPredictor, FamilyBuilder, ForestFamilyBuilder, QoobParams,
    SweepInstance, TreeCount,
};
use nested_conformal::data::Dataset;
use nested_conformal::family::FamilyKind;
use nested_conformal::forest::{BagMode, ForestConfig};
use nested_conformal::rank::conformal_quantile;
use nested_conformal::set::{Interval, PredictionSet};
use nested_conformal::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoCalibrationScores = 3,
    NotEnoughData = 4,
    NoOutOfBagTrees = 5,
    BufferTooSmall = 6,
    Internal = 7,
    Panic = 8,
}

impl From<&Error> for NcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NoCalibrationScores => NcStatus::NoCalibrationScores,
            Error::NotEnoughData(_) | Error::UnequalFolds { .. } | Error::DegenerateResample(_) => {
                NcStatus::NotEnoughData
            }
            Error::NoOutOfBagTrees | Error::NeverOutOfBag(_) | Error::ZeroTrees => NcStatus::NoOutOfBagTrees,
            Error::InvalidInterval { .. } | Error::InvalidParameter { .. } => NcStatus::InvalidArgument,
            _ => NcStatus::Internal,
        }
    }
}

/// Shape of a prediction set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcSetKind {
    Empty = 0,
    FullLine = 1,
    Union = 2,
}

/// Conformal methods available through the C ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcMethod {
    /// Split conformal around the forest mean (half fit, half calibration).
    Split = 0,
    /// Split conformalized quantile regression.
    SplitCqr = 1,
    /// Out-of-bag cross-conformal around the forest mean.
    OobCc = 2,
    /// Quantile out-of-bag cross-conformal.
    Qoob = 3,
    /// Jackknife+ interval of the quantile out-of-bag fits.
    QoobJp = 4,
}

/// Fitting parameters. A `beta` of zero or less selects `2 * alpha`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NcParams {
    pub alpha: f64,
    pub trees: usize,
    pub beta: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

/// Opaque labeled sample.
pub struct NcDataset(Dataset);

/// Opaque calibrated predictor.
pub struct NcPredictor {
    inner: CalibratedPredictor,
    dim: usize,
}

fn guard(f: impl FnOnce() -> Result<(), NcStatus>) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => NcStatus::Panic,
    }
}

fn lib<T>(r: nested_conformal::Result<T>) -> Result<T, NcStatus> {
    r.map_err(|e| NcStatus::from(&e))
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn read<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], NcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(NcStatus::NullPointer);
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write<T>(out: *mut T, value: T) -> Result<(), NcStatus> {
    if out.is_null() {
        return Err(NcStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

/// Static description of a status code. Never null; do not free.
#[no_mangle]
pub extern "C" fn nc_status_message(status: NcStatus) -> *const c_char {
    let msg: &'static CStr = match status {
        NcStatus::Ok => c"ok",
        NcStatus::NullPointer => c"null pointer argument",
        NcStatus::InvalidArgument => c"invalid argument",
        NcStatus::NoCalibrationScores => c"no calibration scores",
        NcStatus::NotEnoughData => c"not enough data",
        NcStatus::NoOutOfBagTrees => c"no out-of-bag trees",
        NcStatus::BufferTooSmall => c"output buffer too small",
        NcStatus::Internal => c"internal error",
        NcStatus::Panic => c"panic inside the library",
    };
    msg.as_ptr()
}

/// Copies `n` rows of `dim` features (row-major) and `n` targets.
///
/// # Safety
/// `features` must be valid for `n * dim` reads, `targets` for `n` reads and
/// `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nc_dataset_new(
    features: *const f64,
    targets: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut NcDataset,
) -> NcStatus {
    guard(|| {
        let len = n.checked_mul(dim).ok_or(NcStatus::InvalidArgument)?;
        let x = read(features, len)?.to_vec();
        let y = read(targets, n)?.to_vec();
        let data = lib(Dataset::new(x, y, dim))?;
        write(out, Box::into_raw(Box::new(NcDataset(data))))
    })
}

/// # Safety
/// `data` must be null or a handle from [`nc_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nc_dataset_free(data: *mut NcDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fits and calibrates `method` on `train`.
///
/// # Safety
/// `method` must be one of the declared `NcMethod` values, `train` a live
/// dataset handle, `params` valid for one read and
/// `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nc_predictor_fit(
    train: *const NcDataset,
    method: NcMethod,
    params: *const NcParams,
    out: *mut *mut NcPredictor,
) -> NcStatus {
    guard(|| {
        let train = &train.as_ref().ok_or(NcStatus::NullPointer)?.0;
        let p = *params.as_ref().ok_or(NcStatus::NullPointer)?;
        let beta = if p.beta > 0.0 { p.beta } else { 2.0 * p.alpha };
        let forest = ForestConfig {
            trees: p.trees,
            mode: BagMode::Bootstrap,
            bag_size: None,
            min_leaf: p.min_leaf,
            mtry: None,
            seed: p.seed,
        };
        let qoob_params = QoobParams {
            trees: p.trees,
            beta: Some(beta),
            min_leaf: p.min_leaf,
            seed: p.seed,
            ..QoobParams::default()
        };
        let predictor = match method {
            NcMethod::Split | NcMethod::SplitCqr => {
                let kind = if method == NcMethod::Split {
                    FamilyKind::MeanSymmetric
                } else {
                    FamilyKind::Cqr { beta }
                };
                let half = train.len() / 2;
                let fit: Vec<usize> = (0..half).collect();
                let cal: Vec<usize> = (half..train.len()).collect();
                let family = lib(ForestFamilyBuilder { kind, forest }.build(&train.select(&fit)))?;
                lib(split_calibrate(family, &train.select(&cal), p.alpha))?
            }
            NcMethod::OobCc => lib(oob_calibrate(
                train,
                &forest,
                FamilyKind::MeanSymmetric,
                p.alpha,
                TreeCount::Fixed,
            ))?,
            NcMethod::Qoob => lib(qoob(train, p.alpha, &qoob_params))?,
            NcMethod::QoobJp => lib(qoob(train, p.alpha, &qoob_params).and_then(|q| q.into_jackknife_plus()))?,
        };
        let handle = NcPredictor {
            inner: predictor,
            dim: train.dim(),
        };
        write(out, Box::into_raw(Box::new(handle)))
    })
}

/// # Safety
/// `predictor` must be null or a handle from [`nc_predictor_fit`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn nc_predictor_free(predictor: *mut NcPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// Writes a prediction set as `count` pairs `bounds[2i], bounds[2i + 1]`.
///
/// `out_count` and `out_kind` are always written. When `count` exceeds
/// `capacity` pairs the call returns `NC_STATUS_BUFFER_TOO_SMALL` and leaves
/// `bounds` untouched. `FullLine` is reported as one pair `-inf, inf`.
unsafe fn emit(
    set: &PredictionSet,
    bounds: *mut f64,
    capacity: usize,
    out_count: *mut usize,
    out_kind: *mut NcSetKind,
) -> Result<(), NcStatus> {
    let kind = match set {
        PredictionSet::Empty => NcSetKind::Empty,
        PredictionSet::FullLine => NcSetKind::FullLine,
        PredictionSet::Union(_) => NcSetKind::Union,
    };
    let intervals = set.intervals();
    write(out_count, intervals.len())?;
    write(out_kind, kind)?;
    if intervals.len() > capacity {
        return Err(NcStatus::BufferTooSmall);
    }
    if intervals.is_empty() {
        return Ok(());
    }
    if bounds.is_null() {
        return Err(NcStatus::NullPointer);
    }
    let buf = slice::from_raw_parts_mut(bounds, 2 * intervals.len());
    for (pair, iv) in buf.chunks_exact_mut(2).zip(&intervals) {
        pair[0] = iv.lo();
        pair[1] = iv.hi();
    }
    Ok(())
}

/// Predicts the set at one feature vector of length `dim`, which must
/// match the training data.
///
/// # Safety
/// `predictor` must be a live handle, `x` valid for `dim` reads, `bounds`
/// valid for `2 * capacity` writes, and `out_count`, `out_kind` for one
/// write each.
#[no_mangle]
pub unsafe extern "C" fn nc_predictor_predict(
    predictor: *const NcPredictor,
    x: *const f64,
    dim: usize,
    bounds: *mut f64,
    capacity: usize,
    out_count: *mut usize,
    out_kind: *mut NcSetKind,
) -> NcStatus {
    guard(|| {
        let predictor = predictor.as_ref().ok_or(NcStatus::NullPointer)?;
        if dim != predictor.dim {
            return Err(NcStatus::InvalidArgument);
        }
        let set = predictor.inner.predict(read(x, dim)?);
        emit(&set, bounds, capacity, out_count, out_kind)
    })
}

/// Labels covered by total weight strictly above `threshold`, given `n`
/// closed intervals `[lo[i], hi[i]]`. A null `weights` means unit weights.
///
/// # Safety
/// `lo` and `hi` must be valid for `n` reads, `weights` null or valid for
/// `n` reads, and the output pointers as in [`nc_predictor_predict`].
#[no_mangle]
pub unsafe extern "C" fn nc_sweep(
    lo: *const f64,
    hi: *const f64,
    weights: *const f64,
    n: usize,
    threshold: f64,
    bounds: *mut f64,
    capacity: usize,
    out_count: *mut usize,
    out_kind: *mut NcSetKind,
) -> NcStatus {
    guard(|| {
        let lo = read(lo, n)?;
        let hi = read(hi, n)?;
        let weights = if weights.is_null() { None } else { Some(read(weights, n)?) };
        let mut inst = SweepInstance::new(threshold);
        for i in 0..n {
            let iv = lib(Interval::new(lo[i], hi[i]))?;
            let w = weights.map_or(1.0, |w| w[i]);
            if w.is_nan() || w <= 0.0 {
                return Err(NcStatus::InvalidArgument);
            }
            inst.push(iv, w);
        }
        emit(&sweep(&inst), bounds, capacity, out_count, out_kind)
    })
}

/// The `ceil((1 - alpha)(n + 1))`-th smallest of `n` scores, or `+inf` when
/// that rank exceeds `n`.
///
/// # Safety
/// `scores` must be valid for `n` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn nc_conformal_quantile(scores: *const f64, n: usize, alpha: f64, out: *mut f64) -> NcStatus {
    guard(|| {
        let q = lib(conformal_quantile(read(scores, n)?, alpha))?;
        write(out, q)
    })
}
