//! C ABI over `banditmt`.
//!
//! Every fallible function returns a [`BmtStatus`]; results go through out
//! pointers. On failure a message is kept per thread and can be read with
//! [`bmt_last_error`]. Handles are opaque and must be released with their
//! `*_free` function. Sentences cross the boundary as UTF-8 strings of
//! space-separated tokens.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use banditmt::estimator::Estimator;
use banditmt::metrics::{chrf, gleu, sbleu, ter, MetricConfig};
use banditmt::policy::Policy;
use banditmt::reliability::{krippendorff_alpha, zscore_normalize, ReliabilityMatrix, Scale};
use banditmt::text::Sentence;
use banditmt::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BmtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Parse = 4,
    UndefinedAlpha = 5,
    Numerical = 6,
    Io = 7,
    NotFound = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BmtScale {
    Nominal = 0,
    Ordinal = 1,
    Interval = 2,
}

/// Raters x units reliability data.
pub struct BmtMatrix(ReliabilityMatrix);

/// Trained reward estimator.
pub struct BmtEstimator(Estimator);

/// Translation policy.
pub struct BmtPolicy(Policy);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BmtStatus {
    match e {
        Error::InvalidInput(_) | Error::Validation(_) | Error::Shortage { .. } | Error::Infeasible(_) => {
            BmtStatus::InvalidInput
        }
        Error::Parse { .. } | Error::Json(_) => BmtStatus::Parse,
        Error::UndefinedAlpha(_) => BmtStatus::UndefinedAlpha,
        Error::Numerical(_) => BmtStatus::Numerical,
        Error::NotFound(_) => BmtStatus::NotFound,
        Error::File { .. } | Error::Io(_) => BmtStatus::Io,
        Error::Duplicate(_) | Error::Unauthorized(_) => BmtStatus::InvalidInput,
    }
}

struct Fail(BmtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BmtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BmtStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            BmtStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(BmtStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(BmtStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn sentence_arg(p: *const c_char, what: &str) -> Result<Sentence, Fail> {
    Ok(Sentence::parse(str_arg(p, what)?))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(BmtStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(BmtStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(BmtStatus::NullPointer, format!("{what} is null")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(BmtStatus::InvalidInput, "string contains NUL".into()))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn bmt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn bmt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn bmt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- reliability matrix

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bmt_matrix_new(scale: BmtScale, out: *mut *mut BmtMatrix) -> BmtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scale = match scale {
            BmtScale::Nominal => Scale::Nominal,
            BmtScale::Ordinal => Scale::Ordinal,
            BmtScale::Interval => Scale::Interval,
        };
        *out = Box::into_raw(Box::new(BmtMatrix(ReliabilityMatrix::new(scale))));
        Ok(())
    })
}

/// Parses the JSON form `{"scale": ..., "entries": [{"rater", "unit", "value"}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bmt_matrix_from_json(json: *const c_char, out: *mut *mut BmtMatrix) -> BmtStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let m: ReliabilityMatrix = serde_json::from_str(text).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(BmtMatrix(m)));
        Ok(())
    })
}

/// Adds one value; a rater may give several values for a unit.
///
/// # Safety
/// `m` must be a live matrix handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bmt_matrix_add(m: *mut BmtMatrix, rater: *const c_char, unit: *const c_char, value: f64) -> BmtStatus {
    guard(|| {
        let m = handle_mut(m, "matrix")?;
        m.0.add(str_arg(rater, "rater")?, str_arg(unit, "unit")?, value)?;
        Ok(())
    })
}

/// # Safety
/// `m` must be a live matrix handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_matrix_alpha(m: *const BmtMatrix, out: *mut f64) -> BmtStatus {
    guard(|| {
        let m = handle(m, "matrix")?;
        let out = out_arg(out, "out")?;
        *out = krippendorff_alpha(&m.0)?.alpha;
        Ok(())
    })
}

/// New matrix with every rater's values standardized.
///
/// # Safety
/// `m` must be a live matrix handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_matrix_zscore(m: *const BmtMatrix, out: *mut *mut BmtMatrix) -> BmtStatus {
    guard(|| {
        let m = handle(m, "matrix")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(BmtMatrix(zscore_normalize(&m.0).matrix)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bmt_matrix_free(m: *mut BmtMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

// ---- metrics

unsafe fn metric(hyp: *const c_char, reference: *const c_char, out: *mut f64, f: impl FnOnce(&[String], &[String], &MetricConfig) -> banditmt::Result<f64>) -> BmtStatus {
    guard(|| {
        let h = sentence_arg(hyp, "hypothesis")?;
        let r = sentence_arg(reference, "reference")?;
        let out = out_arg(out, "out")?;
        *out = f(h.tokens(), r.tokens(), &MetricConfig::default())?;
        Ok(())
    })
}

/// Smoothed sentence BLEU in [0, 1].
///
/// # Safety
/// Strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_sbleu(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> BmtStatus {
    metric(hyp, reference, out, |h, r, c| Ok(sbleu(h, r, c)))
}

/// Sentence GLEU in [0, 1].
///
/// # Safety
/// Strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_gleu(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> BmtStatus {
    metric(hyp, reference, out, |h, r, c| Ok(gleu(h, r, c)))
}

/// Character n-gram F-score in [0, 1].
///
/// # Safety
/// Strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_chrf(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> BmtStatus {
    metric(hyp, reference, out, |h, r, c| Ok(chrf(h, r, c)))
}

/// Translation edit rate; the reference must be non-empty.
///
/// # Safety
/// Strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_ter(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> BmtStatus {
    metric(hyp, reference, out, ter)
}

// ---- reward estimator

/// # Safety
/// `path` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_estimator_load(path: *const c_char, out: *mut *mut BmtEstimator) -> BmtStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(BmtEstimator(Estimator::load(Path::new(p))?)));
        Ok(())
    })
}

/// Raw estimator output for a source/translation pair.
///
/// # Safety
/// `e` a live handle, strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_estimator_predict(e: *const BmtEstimator, source: *const c_char, target: *const c_char, out: *mut f64) -> BmtStatus {
    guard(|| {
        let e = handle(e, "estimator")?;
        let (x, y) = (sentence_arg(source, "source")?, sentence_arg(target, "target")?);
        let out = out_arg(out, "out")?;
        *out = e.0.predict(&x, &y)?;
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bmt_estimator_free(e: *mut BmtEstimator) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

// ---- policy

/// # Safety
/// `path` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_policy_load(path: *const c_char, out: *mut *mut BmtPolicy) -> BmtStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(BmtPolicy(Policy::load(Path::new(p))?)));
        Ok(())
    })
}

/// Greedy translation; release `*out` with [`bmt_string_free`].
///
/// # Safety
/// `p` a live handle, `source` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_policy_translate(p: *const BmtPolicy, source: *const c_char, out: *mut *mut c_char) -> BmtStatus {
    guard(|| {
        let p = handle(p, "policy")?;
        let x = sentence_arg(source, "source")?;
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = into_c_string(p.0.greedy_decode(&x)?.translation.text())?;
        Ok(())
    })
}

/// Log-probability of `target` given `source`, including end of sentence.
///
/// # Safety
/// `p` a live handle, strings NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bmt_policy_log_prob(p: *const BmtPolicy, source: *const c_char, target: *const c_char, out: *mut f64) -> BmtStatus {
    guard(|| {
        let p = handle(p, "policy")?;
        let (x, y) = (sentence_arg(source, "source")?, sentence_arg(target, "target")?);
        let out = out_arg(out, "out")?;
        *out = p.0.log_prob(&x, &y)?.log_prob;
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bmt_policy_free(p: *mut BmtPolicy) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}
