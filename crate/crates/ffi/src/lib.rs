//! C ABI over the lexilearn toolkit.
//!
//! Objects are opaque handles created by `lx_*_load`/`lx_*_new` and
//! released by the matching `lx_*_free`. Every fallible call returns an
//! [`LxStatus`]; on failure the message is available from
//! [`lx_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lexilearn::cind::CooccurrenceNetwork;
use lexilearn::deep::DeepMap;
use lexilearn::encoding::FormMatrix;
use lexilearn::linear::{predict_semantics, Direction, LinearMap};
use lexilearn::predictors::NeighborIndex;
use lexilearn::{Error, Matrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Divergence = 5,
    Panic = 6,
}

/// A trained comprehension model: linear map or deep network.
pub struct LxModel {
    inner: Model,
}

enum Model {
    Linear(LinearMap),
    Deep(Box<DeepMap>),
}

/// An incrementally trained word co-occurrence network.
pub struct LxCind {
    net: CooccurrenceNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: LxStatus, msg: impl Into<String>) -> LxStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> LxStatus {
    let status = match e {
        Error::Config(_) => LxStatus::Config,
        Error::InvalidArgument(_) | Error::Shape(_) => LxStatus::InvalidArgument,
        Error::Divergence { .. } => LxStatus::Divergence,
        _ => LxStatus::Data,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LxStatus) -> LxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LxStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, LxStatus> {
    if p.is_null() {
        return Err(fail(LxStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LxStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn str_array<'a>(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<&'a str>, LxStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(LxStatus::NullPointer, format!("{what} is null")));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .map(|&s| str_arg(s, what))
        .collect()
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], LxStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(LxStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(LxStatus::NullPointer, concat!(stringify!($p), " is null"));
        }
    };
}

/// Message of the last failure on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Pearson correlation of two length-`n` vectors.
///
/// # Safety
/// `a` and `b` must point to `n` readable doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn lx_pearson(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        let a = try_ffi!(slice_arg(a, n, "a"));
        let b = try_ffi!(slice_arg(b, n, "b"));
        match lexilearn::semantic::pearson(a, b) {
            Ok(r) => {
                *out = r;
                LxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of distinct words in `lexicon` that differ from `word` by one substitution.
///
/// # Safety
/// `word` must be a NUL-terminated string, `lexicon` must hold `n` of
/// them and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lx_ncount(
    word: *const c_char,
    lexicon: *const *const c_char,
    n: usize,
    out: *mut usize,
) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        let word = try_ffi!(str_arg(word, "word"));
        let lexicon = try_ffi!(str_array(lexicon, n, "lexicon"));
        *out = NeighborIndex::new(lexicon.into_iter().map(str::to_string)).ncount(word);
        LxStatus::Ok
    })
}

/// Trainable parameter count of a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_count_parameters(path: *const c_char, out: *mut usize) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        let path = try_ffi!(str_arg(path, "path"));
        match lexilearn::pipeline::count_parameters(Path::new(path)) {
            Ok(n) => {
                *out = n;
                LxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Load a comprehension checkpoint (linear or deep).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_model_load(path: *const c_char, out: *mut *mut LxModel) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let path = Path::new(try_ffi!(str_arg(path, "path")));
        let inner = match lexilearn::pipeline::count_parameters(path) {
            Err(e) => return from_error(e),
            Ok(_) => match LinearMap::load(path) {
                Ok(map) if map.direction() == Direction::Comprehension => Model::Linear(map),
                Ok(_) => return fail(LxStatus::InvalidArgument, "not a comprehension map"),
                Err(_) => match DeepMap::load(path) {
                    Ok(net) => Model::Deep(Box::new(net)),
                    Err(e) => return from_error(e),
                },
            },
        };
        *out = Box::into_raw(Box::new(LxModel { inner }));
        LxStatus::Ok
    })
}

/// Release a model; null is ignored.
///
/// # Safety
/// `model` must come from [`lx_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lx_model_free(model: *mut LxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input (cue) and output (semantic) dimensions of a model.
///
/// # Safety
/// `model` must be a live handle; `inputs` and `outputs` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_model_dims(model: *const LxModel, inputs: *mut usize, outputs: *mut usize) -> LxStatus {
    guard(|| {
        out_ptr!(inputs);
        out_ptr!(outputs);
        let Some(m) = model.as_ref() else {
            return fail(LxStatus::NullPointer, "model is null");
        };
        (*inputs, *outputs) = match &m.inner {
            Model::Linear(map) => map.weights().shape(),
            Model::Deep(net) => (net.inputs(), net.outputs()),
        };
        LxStatus::Ok
    })
}

/// Trainable parameter count of a loaded model.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_model_parameter_count(model: *const LxModel, out: *mut usize) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        let Some(m) = model.as_ref() else {
            return fail(LxStatus::NullPointer, "model is null");
        };
        *out = match &m.inner {
            Model::Linear(map) => map.parameter_count(),
            Model::Deep(net) => net.parameter_count(),
        };
        LxStatus::Ok
    })
}

/// Predict semantic vectors for `rows` binary cue rows.
///
/// `forms` is row-major `rows x inputs` with entries 0 or 1; `out` receives
/// row-major `rows x outputs` and must hold `out_len` doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn lx_model_predict(
    model: *const LxModel,
    forms: *const f64,
    rows: usize,
    out: *mut f64,
    out_len: usize,
) -> LxStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(LxStatus::NullPointer, "model is null");
        };
        let (inputs, outputs) = match &m.inner {
            Model::Linear(map) => map.weights().shape(),
            Model::Deep(net) => (net.inputs(), net.outputs()),
        };
        if out_len != rows * outputs {
            return fail(
                LxStatus::InvalidArgument,
                format!("out_len {out_len} but {rows} rows of {outputs} outputs"),
            );
        }
        let data = try_ffi!(slice_arg(forms, rows * inputs, "forms")).to_vec();
        let run = || -> lexilearn::Result<Matrix> {
            let dense = Matrix::from_vec(rows, inputs, data)?;
            let c = FormMatrix::from_dense(&dense, (0..rows).map(|i| i.to_string()).collect())?;
            match &m.inner {
                Model::Linear(map) => predict_semantics(&c, map),
                Model::Deep(net) => net.predict(&c),
            }
        };
        match run() {
            Ok(pred) => {
                if rows > 0 {
                    out_ptr!(out);
                    std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(pred.as_slice());
                }
                LxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// New empty co-occurrence network with learning rate `rate`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lx_cind_new(rate: f64, out: *mut *mut LxCind) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        match CooccurrenceNetwork::new(rate) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(LxCind { net }));
                LxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a network; null is ignored.
///
/// # Safety
/// `cind` must come from [`lx_cind_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lx_cind_free(cind: *mut LxCind) {
    if !cind.is_null() {
        drop(Box::from_raw(cind));
    }
}

/// One learning event on the `n` words of an utterance.
///
/// # Safety
/// `cind` must be a live handle and `words` must hold `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lx_cind_update(cind: *mut LxCind, words: *const *const c_char, n: usize) -> LxStatus {
    guard(|| {
        let Some(c) = cind.as_mut() else {
            return fail(LxStatus::NullPointer, "cind is null");
        };
        let words = try_ffi!(str_array(words, n, "words"));
        match c.net.update(&words) {
            Ok(()) => LxStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Self-association weight of `word` (0 for unseen words).
///
/// # Safety
/// `cind` must be a live handle, `word` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_cind_value(cind: *const LxCind, word: *const c_char, out: *mut f64) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        let Some(c) = cind.as_ref() else {
            return fail(LxStatus::NullPointer, "cind is null");
        };
        let word = try_ffi!(str_arg(word, "word"));
        *out = c.net.contextual_independence(word);
        LxStatus::Ok
    })
}

/// Weight from `cue` to `outcome` (0 if never stored).
///
/// # Safety
/// `cind` must be a live handle, both strings NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lx_cind_weight(
    cind: *const LxCind,
    cue: *const c_char,
    outcome: *const c_char,
    out: *mut f64,
) -> LxStatus {
    guard(|| {
        out_ptr!(out);
        let Some(c) = cind.as_ref() else {
            return fail(LxStatus::NullPointer, "cind is null");
        };
        let cue = try_ffi!(str_arg(cue, "cue"));
        let outcome = try_ffi!(str_arg(outcome, "outcome"));
        *out = c.net.weight(cue, outcome);
        LxStatus::Ok
    })
}
