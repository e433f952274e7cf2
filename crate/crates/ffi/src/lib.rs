//! C ABI over the Gaussian study: build a data-generating process, sample
//! datasets, fit a method and score it.
//!
//! Every handle is opaque and owned by the caller once returned; release it
//! with the matching `*_free`. Functions return a [`CfaugStatus`]; on failure
//! the message is available from [`cfaug_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cfaug::dgp::{
    build_default_gaussian_dgp, sample_dataset, GaussianDgp, InterventionPolicy, TableSampler,
};
use cfaug::experiment::{fit_method, xstar_bayes_accuracy, MethodCell, SweepConfig};
use cfaug::metrics::MiUnit;
use cfaug::rng::{derive_seed, seeded, SeedPart};
use cfaug::train::{evaluate, LinearModel};
use cfaug::{Error, LabeledExample};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaugStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Infeasible = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaugPolicy {
    /// The training attribute table.
    Keep = 0,
    /// C uniform and independent of Y.
    Uniform = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaugMethod {
    Erm = 0,
    Reweight = 1,
    /// `param` is the penalty weight.
    Mmd = 2,
    /// `param` is the penalty weight.
    Irmv1 = 3,
    /// `param` is the group step size.
    GroupDro = 4,
    AugOracle = 5,
    /// `param` is the corruption level in [0, 1].
    AugCorrupt = 6,
    AugDiffInDiff = 7,
    XstarBayes = 8,
}

pub struct CfaugDgp(GaussianDgp);

pub struct CfaugDataset(Vec<LabeledExample>);

pub struct CfaugModel(LinearModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> CfaugStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::AlphabetMismatch(..) => {
            CfaugStatus::DimensionMismatch
        }
        Error::SamplingBudgetExhausted { .. }
        | Error::Infeasible(_)
        | Error::NoMatch(_)
        | Error::EmptyPool => CfaugStatus::Infeasible,
        Error::NonFinite { .. } => CfaugStatus::Numerical,
        Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Schema { .. }
        | Error::MissingArtifact(_) => CfaugStatus::Io,
        _ => CfaugStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (CfaugStatus, String)>) -> CfaugStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfaugStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CfaugStatus::Panic
        }
    }
}

fn lib(err: Error) -> (CfaugStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (CfaugStatus, String) {
    (CfaugStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CfaugStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cfaug_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn cfaug_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default Gaussian model whose P(C|Y) has I(Y;C) in `[mi_lo, mi_hi]` bits.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dgp_new(
    seed: u64,
    mi_lo: f64,
    mi_hi: f64,
    out: *mut *mut CfaugDgp,
) -> CfaugStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SweepConfig::default();
        let base = build_default_gaussian_dgp(seed, cfg.class_mean_norm, cfg.attr_mean_norm)
            .map_err(lib)?;
        let table = TableSampler::with_unit(MiUnit::Bits)
            .sample(
                &base.p_y,
                base.num_attributes,
                mi_lo,
                mi_hi,
                &mut seeded(derive_seed(seed, &[SeedPart::Tag("table")])),
            )
            .map_err(lib)?;
        put(out, CfaugDgp(base.with_table(table).map_err(lib)?));
        Ok(())
    })
}

/// # Safety
/// `dgp` must be null or a handle from [`cfaug_dgp_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dgp_free(dgp: *mut CfaugDgp) {
    if !dgp.is_null() {
        drop(Box::from_raw(dgp));
    }
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `dgp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dgp_dim(dgp: *const CfaugDgp) -> usize {
    dgp.as_ref().map_or(0, |d| d.0.dim())
}

/// Accuracy of the Bayes classifier restricted to the causal block.
///
/// # Safety
/// `dgp` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dgp_bayes_accuracy(
    dgp: *const CfaugDgp,
    out: *mut f64,
) -> CfaugStatus {
    guard(|| {
        let dgp = get(dgp, "dgp")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = xstar_bayes_accuracy(&dgp.0).map_err(lib)?;
        Ok(())
    })
}

/// Samples `n` examples under `policy`.
///
/// # Safety
/// `dgp` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dataset_sample(
    dgp: *const CfaugDgp,
    n: usize,
    policy: CfaugPolicy,
    seed: u64,
    out: *mut *mut CfaugDataset,
) -> CfaugStatus {
    guard(|| {
        let dgp = get(dgp, "dgp")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let policy = match policy {
            CfaugPolicy::Keep => InterventionPolicy::KeepTraining,
            CfaugPolicy::Uniform => InterventionPolicy::UniformC,
        };
        let data = sample_dataset(&dgp.0, n, &policy, &mut seeded(seed)).map_err(lib)?;
        put(out, CfaugDataset(data));
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dataset_free(ds: *mut CfaugDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of examples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dataset_len(ds: *const CfaugDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Copies example `index`: `x` into `x_out` (exactly `x_len` values), the
/// label and attribute into `y_out` / `c_out` (either may be null).
///
/// # Safety
/// `ds` must be a live handle and `x_out` valid for `x_len` writes.
#[no_mangle]
pub unsafe extern "C" fn cfaug_dataset_get(
    ds: *const CfaugDataset,
    index: usize,
    x_out: *mut f64,
    x_len: usize,
    y_out: *mut usize,
    c_out: *mut usize,
) -> CfaugStatus {
    guard(|| {
        let ds = get(ds, "dataset")?;
        let ex = ds.0.get(index).ok_or_else(|| {
            (
                CfaugStatus::InvalidArgument,
                format!("index {index} >= {}", ds.0.len()),
            )
        })?;
        if x_len != ex.x.len() {
            return Err(lib(Error::DimensionMismatch {
                expected: ex.x.len(),
                got: x_len,
            }));
        }
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        ptr::copy_nonoverlapping(ex.x.as_ptr(), x_out, x_len);
        if !y_out.is_null() {
            *y_out = ex.y;
        }
        if !c_out.is_null() {
            *c_out = ex.c;
        }
        Ok(())
    })
}

/// Trains `method` on `train` with the default training configuration.
/// `param` is ignored by methods without a parameter.
///
/// # Safety
/// Handles must be live and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cfaug_fit(
    dgp: *const CfaugDgp,
    train: *const CfaugDataset,
    method: CfaugMethod,
    param: f64,
    seed: u64,
    out: *mut *mut CfaugModel,
) -> CfaugStatus {
    guard(|| {
        let dgp = get(dgp, "dgp")?;
        let train = get(train, "train")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cell = match method {
            CfaugMethod::Erm => MethodCell::Erm,
            CfaugMethod::Reweight => MethodCell::Reweight,
            CfaugMethod::Mmd => MethodCell::Mmd(param),
            CfaugMethod::Irmv1 => MethodCell::Irmv1(param),
            CfaugMethod::GroupDro => MethodCell::GroupDro(param),
            CfaugMethod::AugOracle => MethodCell::AugOracle,
            CfaugMethod::AugCorrupt => MethodCell::AugCorrupt(param),
            CfaugMethod::AugDiffInDiff => MethodCell::AugDiffInDiff,
            CfaugMethod::XstarBayes => MethodCell::XstarBayes,
        };
        let fitted =
            fit_method(cell, &dgp.0, &train.0, &SweepConfig::default(), seed).map_err(lib)?;
        put(out, CfaugModel(fitted.model));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn cfaug_model_free(model: *mut CfaugModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of weights, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfaug_model_dim(model: *const CfaugModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Copies the weights (exactly `len` values) and the bias.
///
/// # Safety
/// `model` must be live, `weights` valid for `len` writes, `bias` for one.
#[no_mangle]
pub unsafe extern "C" fn cfaug_model_params(
    model: *const CfaugModel,
    weights: *mut f64,
    len: usize,
    bias: *mut f64,
) -> CfaugStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        if len != m.dim() {
            return Err(lib(Error::DimensionMismatch {
                expected: m.dim(),
                got: len,
            }));
        }
        if weights.is_null() || bias.is_null() {
            return Err(null("weights/bias"));
        }
        ptr::copy_nonoverlapping(m.weights.as_ptr(), weights, len);
        *bias = m.bias;
        Ok(())
    })
}

/// `P(Y = 1 | x)` for one feature vector of length `len`.
///
/// # Safety
/// `model` must be live, `x` valid for `len` reads, `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn cfaug_model_predict_proba(
    model: *const CfaugModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> CfaugStatus {
    guard(|| {
        let m = &get(model, "model")?.0;
        if len != m.dim() {
            return Err(lib(Error::DimensionMismatch {
                expected: m.dim(),
                got: len,
            }));
        }
        if x.is_null() || out.is_null() {
            return Err(null("x/out"));
        }
        let z = m.logit(std::slice::from_raw_parts(x, len));
        *out = 1.0 / (1.0 + (-z).exp());
        Ok(())
    })
}

/// Accuracy of `model` on `ds`.
///
/// # Safety
/// Handles must be live and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cfaug_model_accuracy(
    model: *const CfaugModel,
    ds: *const CfaugDataset,
    out: *mut f64,
) -> CfaugStatus {
    guard(|| {
        let m = get(model, "model")?;
        let ds = get(ds, "dataset")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = evaluate(&m.0, &ds.0).map_err(lib)?.accuracy;
        Ok(())
    })
}
