use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use cfaug_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { cfaug_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn dgp() -> *mut CfaugDgp {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { cfaug_dgp_new(3, 0.7, 0.8, &mut out) },
        CfaugStatus::Ok
    );
    assert!(!out.is_null());
    out
}

#[test]
fn round_trip_sample_fit_score() {
    unsafe {
        let g = dgp();
        assert_eq!(cfaug_dgp_dim(g), 310);
        let mut bayes = 0.0;
        assert_eq!(cfaug_dgp_bayes_accuracy(g, &mut bayes), CfaugStatus::Ok);
        assert!(bayes > 0.9 && bayes < 1.0);

        let mut train = ptr::null_mut();
        assert_eq!(
            cfaug_dataset_sample(g, 200, CfaugPolicy::Keep, 1, &mut train),
            CfaugStatus::Ok
        );
        assert_eq!(cfaug_dataset_len(train), 200);
        let mut x = vec![0.0; 310];
        let (mut y, mut c) = (9usize, 9usize);
        assert_eq!(
            cfaug_dataset_get(train, 0, x.as_mut_ptr(), 310, &mut y, &mut c),
            CfaugStatus::Ok
        );
        assert!(y < 2 && c < 8);
        assert!(x.iter().any(|v| *v != 0.0));

        let mut model = ptr::null_mut();
        assert_eq!(
            cfaug_fit(g, train, CfaugMethod::AugCorrupt, 0.3, 5, &mut model),
            CfaugStatus::Ok
        );
        assert_eq!(cfaug_model_dim(model), 310);
        let mut p = -1.0;
        assert_eq!(
            cfaug_model_predict_proba(model, x.as_ptr(), 310, &mut p),
            CfaugStatus::Ok
        );
        assert!((0.0..=1.0).contains(&p));

        let mut test = ptr::null_mut();
        assert_eq!(
            cfaug_dataset_sample(g, 500, CfaugPolicy::Uniform, 2, &mut test),
            CfaugStatus::Ok
        );
        let mut acc = 0.0;
        assert_eq!(cfaug_model_accuracy(model, test, &mut acc), CfaugStatus::Ok);
        assert!(acc > 0.6, "accuracy {acc}");

        let mut w = vec![0.0; 310];
        let mut b = 0.0;
        assert_eq!(
            cfaug_model_params(model, w.as_mut_ptr(), 310, &mut b),
            CfaugStatus::Ok
        );
        let z: f64 = w.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + b;
        assert!((1.0 / (1.0 + (-z).exp()) - p).abs() < 1e-12);

        cfaug_model_free(model);
        cfaug_dataset_free(test);
        cfaug_dataset_free(train);
        cfaug_dgp_free(g);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            cfaug_dgp_new(0, 0.7, 0.8, ptr::null_mut()),
            CfaugStatus::NullPointer
        );
        assert_eq!(
            cfaug_dgp_new(0, 0.8, 0.7, &mut out),
            CfaugStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert!(!last_error().is_empty());

        let g = dgp();
        let mut ds = ptr::null_mut();
        assert_eq!(
            cfaug_dataset_sample(g, 10, CfaugPolicy::Keep, 0, &mut ds),
            CfaugStatus::Ok
        );
        let mut x = vec![0.0; 3];
        assert_eq!(
            cfaug_dataset_get(ds, 0, x.as_mut_ptr(), 3, ptr::null_mut(), ptr::null_mut()),
            CfaugStatus::DimensionMismatch
        );
        assert!(last_error().contains("dimension"));
        assert_eq!(
            cfaug_dataset_get(ds, 10, x.as_mut_ptr(), 3, ptr::null_mut(), ptr::null_mut()),
            CfaugStatus::InvalidArgument
        );
        let mut acc = 0.0;
        assert_eq!(
            cfaug_model_accuracy(ptr::null(), ds, &mut acc),
            CfaugStatus::NullPointer
        );
        assert_eq!(cfaug_dataset_len(ptr::null()), 0);
        cfaug_dataset_free(ds);
        cfaug_dgp_free(g);
        cfaug_dgp_free(ptr::null_mut());
    }
}

#[test]
fn last_error_truncates() {
    unsafe {
        cfaug_dgp_new(0, 0.7, 0.8, ptr::null_mut());
        let mut small = [1 as std::ffi::c_char; 4];
        let full = cfaug_last_error(small.as_mut_ptr(), small.len());
        assert!(full > 3);
        assert_eq!(small[3], 0);
        assert_eq!(cfaug_last_error(ptr::null_mut(), 0), full);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(cfaug_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cfaug.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "cfaug_dgp_new",
        "cfaug_fit",
        "cfaug_last_error",
        "CFAUG_STATUS_OK",
        "typedef struct CfaugModel CfaugModel",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}
