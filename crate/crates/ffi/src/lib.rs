//! C interface: opaque model and dataset handles, status codes and a
//! thread-local last-error message.
//!
//! Every function returns a [`DkStatus`]; outputs go through pointer
//! arguments. Handles are released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ditchkit::dataset::{read_dlf, Dataset, LoadFrame};
use ditchkit::nn::Tensor;
use ditchkit::surrogates::{count_params, ArchDims, ModelArch, ModelMeta, Surrogate, Variant};
use ditchkit::Error;

/// Result of every call. The numeric values match the command line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DkStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numeric = 3,
    Io = 4,
    IncompleteGrid = 5,
    InvalidUtf8 = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Surrogate network with its normalization constants.
pub struct DkModel {
    model: Surrogate<f32>,
    meta: ModelMeta,
}

/// Decoded DLF file.
pub struct DkDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(DkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            2 => DkStatus::Config,
            3 => DkStatus::Numeric,
            4 => DkStatus::Io,
            _ => DkStatus::IncompleteGrid,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: DkStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DkStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(fail(DkStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            DkStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(DkStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(DkStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(DkStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(DkStatus::NullPointer, format!("{what} handle is null")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

fn arch_from(name: &str, patch: usize, ell: usize) -> Result<ModelArch, Failure> {
    let variant = Variant::parse(name)?;
    let dims = if patch == ArchDims::full().patch { ArchDims::full() } else { ArchDims { patch, ..ArchDims::desk() } };
    Ok(ModelArch { variant, ell, dims })
}

/// Trainable parameter count of `arch` ("cjm", "cjmdd", "cjmnlb", "kae",
/// "unfilter") for square patches of side `patch` and `ell` input frames.
/// Patch 128 uses the full-size layer widths.
///
/// # Safety
/// `arch` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dk_count_params(arch: *const c_char, patch: usize, ell: usize, out: *mut u64) -> DkStatus {
    guard(|| {
        let a = arch_from(str_arg(arch, "arch")?, patch, ell)?;
        *out_arg(out, "out")? = count_params(&a)? as u64;
        Ok(())
    })
}

/// Builds a freshly initialized model. Loads are scaled with `x_min` and
/// `x_max` (Pa) when predicting through [`dk_model_predict_pa`].
///
/// # Safety
/// `arch` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dk_model_build(
    arch: *const c_char,
    patch: usize,
    ell: usize,
    seed: u64,
    x_min: f64,
    x_max: f64,
    out: *mut *mut DkModel,
) -> DkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = arch_from(str_arg(arch, "arch")?, patch, ell)?;
        if !(x_max > x_min) {
            return Err(fail(DkStatus::Config, format!("x_max {x_max} must exceed x_min {x_min}")));
        }
        let model = Surrogate::build(a, seed)?;
        *out = Box::into_raw(Box::new(DkModel { model, meta: ModelMeta { arch: a, seed, x_min, x_max } }));
        Ok(())
    })
}

/// Loads a DKPT checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dk_model_load(path: *const c_char, out: *mut *mut DkModel) -> DkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (model, meta) = Surrogate::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(DkModel { model, meta }));
        Ok(())
    })
}

/// Writes a DKPT checkpoint.
///
/// # Safety
/// `model` must come from this library, `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dk_model_save(model: *const DkModel, path: *const c_char) -> DkStatus {
    guard(|| {
        let m = handle(model, "model")?;
        m.model.save(Path::new(str_arg(path, "path")?), &m.meta)?;
        Ok(())
    })
}

/// Patch side, input window length and trainable parameter count. Any
/// output pointer may be null.
///
/// # Safety
/// `model` must come from this library; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_model_info(model: *const DkModel, patch: *mut usize, ell: *mut usize, params: *mut u64) -> DkStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if let Some(p) = patch.as_mut() {
            *p = m.meta.arch.dims.patch;
        }
        if let Some(e) = ell.as_mut() {
            *e = m.meta.arch.ell;
        }
        if let Some(c) = params.as_mut() {
            *c = m.model.param_count() as u64;
        }
        Ok(())
    })
}

fn frames_per_sample(m: &DkModel) -> usize {
    match m.meta.arch.variant {
        Variant::Unfilter => 1,
        _ => m.meta.arch.ell,
    }
}

unsafe fn predict(m: &DkModel, input: *const f32, n: usize, output: *mut f32, out_len: usize, pa: bool) -> Result<(), Failure> {
    if input.is_null() || output.is_null() {
        return Err(fail(DkStatus::NullPointer, "input or output is null"));
    }
    let p = m.meta.arch.dims.patch;
    let k = frames_per_sample(m);
    if out_len != n * p * p {
        return Err(fail(DkStatus::BufferTooSmall, format!("output needs {} values, got {out_len}", n * p * p)));
    }
    let mut data = std::slice::from_raw_parts(input, n * k * p * p).to_vec();
    let (lo, span) = (m.meta.x_min, m.meta.x_max - m.meta.x_min);
    if pa {
        data.iter_mut().for_each(|v| *v = ((*v as f64 - lo) / span) as f32);
    }
    let shape = if m.meta.arch.variant == Variant::Unfilter { vec![n, p, p] } else { vec![n, k, p, p] };
    let y = m.model.predict(&Tensor::new(&shape, data)?)?;
    let out = std::slice::from_raw_parts_mut(output, out_len);
    for (o, &v) in out.iter_mut().zip(&y.data) {
        *o = if pa { (v as f64 * span + lo) as f32 } else { v };
    }
    Ok(())
}

/// One prediction step on normalized data. `input` holds `n` windows of
/// `ell` frames (one blurred frame for the unfilter model) of `patch^2`
/// row-major values; `output` receives `n * patch^2` values.
///
/// # Safety
/// `input` must hold `n * ell * patch^2` floats, `output` `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn dk_model_predict(model: *const DkModel, input: *const f32, n: usize, output: *mut f32, out_len: usize) -> DkStatus {
    guard(|| predict(handle(model, "model")?, input, n, output, out_len, false))
}

/// As [`dk_model_predict`] with input and output in Pa, scaled with the
/// model's normalization constants.
///
/// # Safety
/// Same as [`dk_model_predict`].
#[no_mangle]
pub unsafe extern "C" fn dk_model_predict_pa(model: *const DkModel, input: *const f32, n: usize, output: *mut f32, out_len: usize) -> DkStatus {
    guard(|| predict(handle(model, "model")?, input, n, output, out_len, true))
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dk_model_free(model: *mut DkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Reads a DLF file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dk_dataset_read(path: *const c_char, out: *mut *mut DkDataset) -> DkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = read_dlf(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(DkDataset { inner }));
        Ok(())
    })
}

/// Number of cases and the normalization constants (Pa). Any output
/// pointer may be null.
///
/// # Safety
/// `ds` must come from this library; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_dataset_info(ds: *const DkDataset, cases: *mut usize, x_min: *mut f64, x_max: *mut f64) -> DkStatus {
    guard(|| {
        let d = &handle(ds, "dataset")?.inner;
        if let Some(c) = cases.as_mut() {
            *c = d.cases.len();
        }
        if let Some(v) = x_min.as_mut() {
            *v = d.x_min;
        }
        if let Some(v) = x_max.as_mut() {
            *v = d.x_max;
        }
        Ok(())
    })
}

fn case_of(d: &Dataset, case: usize) -> Result<&ditchkit::dataset::CaseRecord, Failure> {
    d.cases.get(case).ok_or_else(|| fail(DkStatus::Config, format!("case {case} out of range ({} cases)", d.cases.len())))
}

/// Frame count and frame shape of one case.
///
/// # Safety
/// `ds` must come from this library; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_dataset_case_shape(ds: *const DkDataset, case: usize, n_t: *mut usize, h: *mut usize, w: *mut usize) -> DkStatus {
    guard(|| {
        let c = case_of(&handle(ds, "dataset")?.inner, case)?;
        let (hh, ww) = c.shape().unwrap_or((0, 0));
        *out_arg(n_t, "n_t")? = c.len();
        *out_arg(h, "h")? = hh;
        *out_arg(w, "w")? = ww;
        Ok(())
    })
}

/// Copies frame `t` of a case (Pa, row-major) into `out`.
///
/// # Safety
/// `ds` must come from this library, `out` must hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn dk_dataset_copy_frame(ds: *const DkDataset, case: usize, t: usize, out: *mut f32, len: usize) -> DkStatus {
    guard(|| {
        let c = case_of(&handle(ds, "dataset")?.inner, case)?;
        let f: &LoadFrame = c.frames.get(t).ok_or_else(|| fail(DkStatus::Config, format!("frame {t} beyond {} frames", c.len())))?;
        if out.is_null() {
            return Err(fail(DkStatus::NullPointer, "out is null"));
        }
        if len < f.data.len() {
            return Err(fail(DkStatus::BufferTooSmall, format!("frame needs {} values, got {len}", f.data.len())));
        }
        std::slice::from_raw_parts_mut(out, f.data.len()).copy_from_slice(&f.data);
        Ok(())
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `ds` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dk_dataset_free(ds: *mut DkDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Normalized RMSE per step of `n_t` frames of `frame_len` values each,
/// divided by `case_max`.
///
/// # Safety
/// `pred` and `truth` must hold `n_t * frame_len` floats, `out` `n_t` doubles.
#[no_mangle]
pub unsafe extern "C" fn dk_rmse_series(
    pred: *const f32,
    truth: *const f32,
    n_t: usize,
    frame_len: usize,
    case_max: f64,
    out: *mut f64,
) -> DkStatus {
    guard(|| {
        if pred.is_null() || truth.is_null() || out.is_null() {
            return Err(fail(DkStatus::NullPointer, "pred, truth or out is null"));
        }
        let frames = |p: *const f32| -> Result<Vec<LoadFrame>, Failure> {
            let all = std::slice::from_raw_parts(p, n_t * frame_len);
            Ok(all.chunks(frame_len.max(1)).map(|c| LoadFrame::new(1, frame_len, c.to_vec())).collect::<Result<_, _>>()?)
        };
        let series = ditchkit::eval::rmse_series(&frames(pred)?, &frames(truth)?, case_max)?;
        std::slice::from_raw_parts_mut(out, n_t).copy_from_slice(&series);
        Ok(())
    })
}

/// Parses a scenario JSON document and reports whether it validates;
/// the reason for a rejection is available through [`dk_last_error`].
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dk_scenario_validate(json: *const c_char) -> DkStatus {
    guard(|| {
        let s: ditchkit::geometry::Scenario =
            serde_json::from_str(str_arg(json, "json")?).map_err(|e| fail(DkStatus::Config, format!("scenario: {e}")))?;
        s.validate()?;
        Ok(())
    })
}
