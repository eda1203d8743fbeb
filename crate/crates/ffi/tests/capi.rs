use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use nested_conformal_ffi::*;

fn line_data(n: usize) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    // deterministic wiggle around a line
    let y = x.iter().enumerate().map(|(i, v)| 3.0 * v + ((i * 7919) % 13) as f64 / 13.0).collect();
    (x, y)
}

fn params() -> NcParams {
    NcParams {
        alpha: 0.1,
        trees: 30,
        beta: 0.0,
        min_leaf: 5,
        seed: 7,
    }
}

unsafe fn dataset(n: usize) -> *mut NcDataset {
    let (x, y) = line_data(n);
    let mut data = ptr::null_mut();
    assert_eq!(nc_dataset_new(x.as_ptr(), y.as_ptr(), n, 1, &mut data), NcStatus::Ok);
    data
}

#[test]
fn fit_predict_free_round_trip() {
    unsafe {
        let data = dataset(120);
        for method in [
            NcMethod::Split,
            NcMethod::SplitCqr,
            NcMethod::OobCc,
            NcMethod::Qoob,
            NcMethod::QoobJp,
        ] {
            let mut pred = ptr::null_mut();
            assert_eq!(nc_predictor_fit(data, method, &params(), &mut pred), NcStatus::Ok);
            let mut bounds = [0.0; 16];
            let mut count = 0;
            let mut kind = NcSetKind::Empty;
            let x = [0.5];
            let status = nc_predictor_predict(pred, x.as_ptr(), 1, bounds.as_mut_ptr(), 8, &mut count, &mut kind);
            assert_eq!(status, NcStatus::Ok, "{method:?}");
            assert_eq!(kind, NcSetKind::Union, "{method:?}");
            assert!(count >= 1);
            // the set should sit around the regression line at 1.5 + noise
            assert!(bounds[0] < 2.0 && bounds[2 * count - 1] > 1.5, "{method:?}: {bounds:?}");

            let status = nc_predictor_predict(pred, x.as_ptr(), 2, bounds.as_mut_ptr(), 8, &mut count, &mut kind);
            assert_eq!(status, NcStatus::InvalidArgument);
            nc_predictor_free(pred);
        }
        nc_dataset_free(data);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(
            nc_dataset_new(ptr::null(), ptr::null(), 3, 1, &mut data),
            NcStatus::NullPointer
        );
        assert!(data.is_null());

        let small = dataset(4);
        let mut pred = ptr::null_mut();
        let p = NcParams { trees: 1, ..params() };
        assert_eq!(nc_predictor_fit(small, NcMethod::Qoob, &p, &mut pred), NcStatus::InvalidArgument);
        let p = NcParams { alpha: 2.0, ..params() };
        assert_eq!(nc_predictor_fit(small, NcMethod::OobCc, &p, &mut pred), NcStatus::InvalidArgument);
        assert_eq!(nc_predictor_fit(small, NcMethod::Qoob, ptr::null(), &mut pred), NcStatus::NullPointer);
        assert!(pred.is_null());
        nc_dataset_free(small);

        let mut q = 0.0;
        assert_eq!(nc_conformal_quantile(ptr::null(), 0, 0.1, &mut q), NcStatus::NoCalibrationScores);

        nc_dataset_free(ptr::null_mut());
        nc_predictor_free(ptr::null_mut());
    }
}

#[test]
fn sweep_and_quantile() {
    unsafe {
        let lo = [0.0, 0.5, 3.0];
        let hi = [1.0, 2.0, 4.0];
        let mut bounds = [0.0; 6];
        let mut count = 0;
        let mut kind = NcSetKind::Empty;
        let status = nc_sweep(lo.as_ptr(), hi.as_ptr(), ptr::null(), 3, 1.0, bounds.as_mut_ptr(), 3, &mut count, &mut kind);
        assert_eq!(status, NcStatus::Ok);
        assert_eq!((count, kind), (1, NcSetKind::Union));
        assert_eq!(&bounds[..2], &[0.5, 1.0]);

        let status = nc_sweep(lo.as_ptr(), hi.as_ptr(), ptr::null(), 3, 0.0, bounds.as_mut_ptr(), 1, &mut count, &mut kind);
        assert_eq!(status, NcStatus::BufferTooSmall);
        assert_eq!(count, 2);

        let status = nc_sweep(lo.as_ptr(), hi.as_ptr(), ptr::null(), 3, -0.5, bounds.as_mut_ptr(), 3, &mut count, &mut kind);
        assert_eq!(status, NcStatus::Ok);
        assert_eq!(kind, NcSetKind::FullLine);
        assert_eq!(&bounds[..2], &[f64::NEG_INFINITY, f64::INFINITY]);

        let bad_hi = [1.0, 0.0, 4.0];
        let status = nc_sweep(lo.as_ptr(), bad_hi.as_ptr(), ptr::null(), 3, 0.0, bounds.as_mut_ptr(), 3, &mut count, &mut kind);
        assert_eq!(status, NcStatus::InvalidArgument);

        let scores: Vec<f64> = (1..=9).map(f64::from).collect();
        let mut q = 0.0;
        assert_eq!(nc_conformal_quantile(scores.as_ptr(), 9, 0.1, &mut q), NcStatus::Ok);
        assert_eq!(q, 9.0);
    }
}

#[test]
fn status_messages_are_static_strings() {
    let msg = unsafe { CStr::from_ptr(nc_status_message(NcStatus::BufferTooSmall)) };
    assert_eq!(msg.to_str().unwrap(), "output buffer too small");
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nested_conformal.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for symbol in [
        "nc_dataset_new",
        "nc_predictor_fit",
        "nc_predictor_predict",
        "nc_sweep",
        "nc_conformal_quantile",
        "NC_STATUS_BUFFER_TOO_SMALL",
        "typedef struct NcPredictor NcPredictor",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler on PATH; skipping syntax check");
        return;
    };
    assert!(status.success(), "header does not compile as C99");
}
