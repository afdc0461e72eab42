//! C ABI over the story-beliefs library.
//!
//! Every fallible function returns an `SbStatus`; on failure the message is
//! available from `sb_last_error` on the same thread. Handles are opaque and
//! must be released with their `_free` function. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use story_beliefs::analysis::{ols, relative_improvement};
use story_beliefs::beliefs;
use story_beliefs::config::PipelineConfig;
use story_beliefs::features::{mvee, path, Extractor, N_DIMS};
use story_beliefs::pipeline::{Pipeline, PipelineError, Stage};

/// Number of feature dimensions written by `sb_extractor_extract`.
pub const SB_FEATURE_DIMS: usize = 30;
const _: () = assert!(SB_FEATURE_DIMS == N_DIMS);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Utf8 = 3,
    Config = 4,
    Prerequisite = 5,
    Stage = 6,
    Provider = 7,
    Numeric = 8,
    Panic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type FfiResult = Result<(), (SbStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult) -> SbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SbStatus::Panic
        }
    }
}

fn pipeline_status(e: &PipelineError) -> SbStatus {
    match e {
        PipelineError::Config(_) => SbStatus::Config,
        PipelineError::Prerequisite { .. } => SbStatus::Prerequisite,
        PipelineError::Stage { .. } => SbStatus::Stage,
        PipelineError::Provider { .. } => SbStatus::Provider,
    }
}

fn pipeline_err(e: PipelineError) -> (SbStatus, String) {
    (pipeline_status(&e), e.to_string())
}

fn invalid(msg: impl Into<String>) -> (SbStatus, String) {
    (SbStatus::InvalidArgument, msg.into())
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), (SbStatus, String)> {
    if p.is_null() {
        Err((SbStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (SbStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (SbStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn rows(p: *const f64, n: usize, dim: usize, what: &str) -> Result<Vec<Vec<f64>>, (SbStatus, String)> {
    if dim == 0 {
        return Err(invalid(format!("{what}: dimension must be positive")));
    }
    let flat = slice(p, n.checked_mul(dim).ok_or_else(|| invalid("size overflow"))?, what)?;
    Ok(flat.chunks(dim).map(<[f64]>::to_vec).collect())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SbStatus, String)> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|e| (SbStatus::Utf8, format!("{what}: {e}")))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> FfiResult {
    non_null(out, what)?;
    *out = v;
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Componentwise mean and population variance of `n_samples` rows of `dim`
/// values. Either output may be null.
///
/// # Safety
/// `samples` must hold `n_samples * dim` values; non-null outputs `dim`.
#[no_mangle]
pub unsafe extern "C" fn sb_beliefs(
    samples: *const f64,
    n_samples: usize,
    dim: usize,
    out_expectation: *mut f64,
    out_uncertainty: *mut f64,
) -> SbStatus {
    guard(|| {
        let s = rows(samples, n_samples, dim, "samples")?;
        let e = beliefs::expectation(&s).map_err(|e| invalid(e.to_string()))?;
        let u = beliefs::uncertainty(&s).map_err(|e| invalid(e.to_string()))?;
        if !out_expectation.is_null() {
            slice_mut(out_expectation, dim, "out_expectation")?.copy_from_slice(&e);
        }
        if !out_uncertainty.is_null() {
            slice_mut(out_uncertainty, dim, "out_uncertainty")?.copy_from_slice(&u);
        }
        Ok(())
    })
}

/// Componentwise squared difference of two expectation vectors.
///
/// # Safety
/// All three pointers must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn sb_surprise(current: *const f64, previous: *const f64, dim: usize, out: *mut f64) -> SbStatus {
    guard(|| {
        let s = beliefs::surprise(slice(current, dim, "current")?, slice(previous, dim, "previous")?)
            .map_err(|e| invalid(e.to_string()))?;
        slice_mut(out, dim, "out")?.copy_from_slice(&s);
        Ok(())
    })
}

/// Mean step length of a path of `n` points.
///
/// # Safety
/// `points` must hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn sb_path_speed(points: *const f64, n: usize, dim: usize, out: *mut f64) -> SbStatus {
    guard(|| {
        let p = rows(points, n, dim, "points")?;
        let s = path::speed(&p).map_err(|e| invalid(e.to_string()))?;
        write(out, s, "out")
    })
}

/// Travelled length over the shortest first-to-last path. `out_exact` (may be
/// null) is set to 1 when the shortest path was solved exactly.
///
/// # Safety
/// `points` must hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn sb_path_circuitousness(
    points: *const f64,
    n: usize,
    dim: usize,
    out_ratio: *mut f64,
    out_exact: *mut i32,
) -> SbStatus {
    guard(|| {
        let p = rows(points, n, dim, "points")?;
        let c = path::circuitousness(&p).map_err(|e| invalid(e.to_string()))?;
        write(out_ratio, c.ratio, "out_ratio")?;
        if !out_exact.is_null() {
            *out_exact = i32::from(c.exact);
        }
        Ok(())
    })
}

/// Enclosing-ellipsoid volume of the path after projection onto its leading
/// principal components.
///
/// # Safety
/// `points` must hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn sb_path_volume(points: *const f64, n: usize, dim: usize, tolerance: f64, out: *mut f64) -> SbStatus {
    guard(|| {
        let p = rows(points, n, dim, "points")?;
        let v = path::path_volume(&p, tolerance).map_err(|e| (SbStatus::Numeric, e.to_string()))?;
        write(out, v.volume, "out")
    })
}

/// Minimum-volume enclosing ellipsoid of `n` points: writes the centre
/// (`dim` values, may be null) and the volume.
///
/// # Safety
/// `points` must hold `n * dim` values.
#[no_mangle]
pub unsafe extern "C" fn sb_mvee(
    points: *const f64,
    n: usize,
    dim: usize,
    tolerance: f64,
    out_center: *mut f64,
    out_volume: *mut f64,
) -> SbStatus {
    guard(|| {
        let p = rows(points, n, dim, "points")?;
        let e = mvee::mvee(&p, tolerance).map_err(|e| (SbStatus::Numeric, e.to_string()))?;
        if !out_center.is_null() {
            slice_mut(out_center, dim, "out_center")?.copy_from_slice(e.center.as_slice());
        }
        write(out_volume, e.volume, "out_volume")
    })
}

/// `(l - f) / (f - b)` for baseline, feature and belief-model adjusted R².
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_relative_improvement(baseline: f64, features: f64, full: f64, out: *mut f64) -> SbStatus {
    guard(|| {
        let r = relative_improvement(baseline, features, full)
            .ok_or_else(|| invalid("feature model does not improve on the baseline"))?;
        write(out, r, "out")
    })
}

/// Ordinary least squares. `x` is `n * k` row-major and its first column
/// must be the intercept. Coefficients and standard errors take `k` values
/// each; `out_r2` and `out_adj_r2` may be null.
///
/// # Safety
/// Buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sb_ols(
    x: *const f64,
    y: *const f64,
    n: usize,
    k: usize,
    out_coefficients: *mut f64,
    out_std_errors: *mut f64,
    out_r2: *mut f64,
    out_adj_r2: *mut f64,
) -> SbStatus {
    guard(|| {
        let xm = rows(x, n, k, "x")?;
        let yv = slice(y, n, "y")?;
        let xmat = nalgebra::DMatrix::from_fn(n, k, |i, j| xm[i][j]);
        let yvec = nalgebra::DVector::from_column_slice(yv);
        let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
        let fit = ols(&xmat, &yvec, &names, None).map_err(|e| (SbStatus::Numeric, e.to_string()))?;
        slice_mut(out_coefficients, k, "out_coefficients")?.copy_from_slice(&fit.coefficients);
        slice_mut(out_std_errors, k, "out_std_errors")?.copy_from_slice(&fit.std_errors);
        if !out_r2.is_null() {
            *out_r2 = fit.r2;
        }
        if !out_adj_r2.is_null() {
            *out_adj_r2 = fit.adj_r2;
        }
        Ok(())
    })
}

/// Opaque pipeline handle.
pub struct SbPipeline {
    inner: Pipeline,
}

/// Opaque feature-extractor handle.
pub struct SbExtractor {
    inner: Extractor,
}

/// Open a pipeline from a TOML config. `out_dir` may be null to keep the
/// configured output directory.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_pipeline_open(config_path: *const c_char, out_dir: *const c_char, out: *mut *mut SbPipeline) -> SbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let mut config = PipelineConfig::load(&path).map_err(|e| (SbStatus::Config, e.to_string()))?;
        if !out_dir.is_null() {
            config.out_dir = PathBuf::from(str_arg(out_dir, "out_dir")?);
        }
        let inner = Pipeline::new(config).map_err(pipeline_err)?;
        *out = Box::into_raw(Box::new(SbPipeline { inner }));
        Ok(())
    })
}

/// Run every stage in order.
///
/// # Safety
/// `handle` must come from `sb_pipeline_open`.
#[no_mangle]
pub unsafe extern "C" fn sb_pipeline_run(handle: *mut SbPipeline) -> SbStatus {
    guard(|| {
        non_null(handle, "handle")?;
        (*handle).inner.run_all().map(|_| ()).map_err(pipeline_err)
    })
}

/// Run one stage by name: clean, imagine, extract, beliefs or regress.
///
/// # Safety
/// `handle` must come from `sb_pipeline_open`; `stage` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sb_pipeline_run_stage(handle: *mut SbPipeline, stage: *const c_char) -> SbStatus {
    guard(|| {
        non_null(handle, "handle")?;
        let s: Stage = str_arg(stage, "stage")?.parse().map_err(invalid)?;
        (*handle).inner.run_stage(s).map_err(pipeline_err)
    })
}

/// Provider calls and cache hits made through this handle so far.
///
/// # Safety
/// `handle` must come from `sb_pipeline_open`; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn sb_pipeline_stats(handle: *const SbPipeline, out_calls: *mut u64, out_cache_hits: *mut u64) -> SbStatus {
    guard(|| {
        non_null(handle, "handle")?;
        let s = (*handle).inner.stats();
        if !out_calls.is_null() {
            *out_calls = s.provider_calls;
        }
        if !out_cache_hits.is_null() {
            *out_cache_hits = s.cache_hits;
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `sb_pipeline_open` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_pipeline_free(handle: *mut SbPipeline) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Feature extractor using the theme model of a pipeline whose extract stage
/// has completed.
///
/// # Safety
/// `pipeline` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_extractor_from_pipeline(pipeline: *const SbPipeline, out: *mut *mut SbExtractor) -> SbStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(pipeline, "pipeline")?;
        let inner = (*pipeline).inner.load_extractor().map_err(pipeline_err)?;
        *out = Box::into_raw(Box::new(SbExtractor { inner }));
        Ok(())
    })
}

/// Extract the `SB_FEATURE_DIMS` features of a text. Dims that could not be
/// computed are written as NaN with `out_present[i] = 0`; `out_present` may
/// be null.
///
/// # Safety
/// `out_values` (and `out_present` if non-null) must hold `SB_FEATURE_DIMS`
/// elements; `text` must be NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn sb_extractor_extract(
    handle: *const SbExtractor,
    text: *const c_char,
    out_values: *mut f64,
    out_present: *mut u8,
) -> SbStatus {
    guard(|| {
        non_null(handle, "handle")?;
        let fv = (*handle).inner.extract(str_arg(text, "text")?);
        let vals = slice_mut(out_values, N_DIMS, "out_values")?;
        for (i, v) in vals.iter_mut().enumerate() {
            *v = if fv.present[i] { fv.values[i] } else { f64::NAN };
        }
        if !out_present.is_null() {
            let p = std::slice::from_raw_parts_mut(out_present, N_DIMS);
            p.iter_mut().zip(&fv.present).for_each(|(o, x)| *o = u8::from(*x));
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must come from `sb_extractor_from_pipeline` and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_extractor_free(handle: *mut SbExtractor) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
