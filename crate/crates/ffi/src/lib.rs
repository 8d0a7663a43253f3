//! C interface to `galerkin-core`.
//!
//! Every fallible function returns a [`GkStatus`]. On failure the message is
//! kept per thread and can be read with [`gk_last_error_message`]. Objects are
//! opaque handles released with their matching `*_free` function; passing
//! `NULL` to a free function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use galerkin_core::cli::matrix_file::import_matrices;
use galerkin_core::dissipative::{two_stage, Mode, TwoStageOptions, TwoStageResult};
use galerkin_core::galerkin::{eigenvalues_of_t, sigma_n, SpectralWindow};
use galerkin_core::linalg::{c64, DenseMatrix};
use galerkin_core::problems::{assemble, FormMatrices, ProblemSpec, SpaceId};
use galerkin_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotPositiveDefinite = 3,
    NotHermitian = 4,
    DimensionMismatch = 5,
    NoConvergence = 6,
    ShiftNotBelowSpectrum = 7,
    NotNested = 8,
    Io = 9,
    Format = 10,
    Numerical = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GkComplex {
    pub re: f64,
    pub im: f64,
}

impl From<c64> for GkComplex {
    fn from(z: c64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Built-in problem families.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkProblem {
    FourierRankOne = 0,
    BlockFem = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GkMode {
    Direct = 0,
    Inverse = 1,
}

/// Form matrices `(T̂, M)` on one trial space.
pub struct GkForms(FormMatrices);

/// A list of complex eigenvalues.
pub struct GkSpectrum(Vec<c64>);

/// Result of a two-stage run.
pub struct GkRun(TwoStageResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> GkStatus {
    match err {
        Error::NotPositiveDefinite { .. } => GkStatus::NotPositiveDefinite,
        Error::NotHermitian { .. } => GkStatus::NotHermitian,
        Error::DimensionMismatch { .. } => GkStatus::DimensionMismatch,
        Error::NoConvergence { .. } => GkStatus::NoConvergence,
        Error::ShiftNotBelowSpectrum { .. } => GkStatus::ShiftNotBelowSpectrum,
        Error::NotNested(_) => GkStatus::NotNested,
        Error::Io { .. } => GkStatus::Io,
        Error::Format(_) => GkStatus::Format,
        Error::InvalidParameter(_) | Error::Config(_) | Error::OverlappingTargets { .. } => GkStatus::InvalidArgument,
        _ => GkStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GkStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            GkStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GkStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn builtin(problem: GkProblem) -> ProblemSpec {
    match problem {
        GkProblem::FourierRankOne => ProblemSpec::FourierRankOne,
        GkProblem::BlockFem => ProblemSpec::BlockFem,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated when `cap > 0`). Returns the full message length in bytes,
/// without the terminator; 0 when no error was recorded.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or be `NULL` with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn gk_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && cap > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Assembles the form matrices of a built-in problem at `level`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gk_forms_assemble(problem: GkProblem, level: usize, out: *mut *mut GkForms) -> GkStatus {
    guard(|| write_out(out, GkForms(assemble(&builtin(problem), level)?)))
}

/// Builds forms from row-major `dim × dim` arrays; runs the Hermiticity and
/// positive-definiteness checks.
///
/// # Safety
/// `t_hat` and `mass` must point to `dim * dim` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_forms_from_arrays(
    dim: usize,
    t_hat: *const GkComplex,
    mass: *const GkComplex,
    out: *mut *mut GkForms,
) -> GkStatus {
    guard(|| {
        if t_hat.is_null() {
            return Err(Failure::Null("t_hat"));
        }
        if mass.is_null() {
            return Err(Failure::Null("mass"));
        }
        if dim == 0 {
            return Err(Failure::Invalid("dim must be positive".into()));
        }
        let read = |p: *const GkComplex| {
            let s = std::slice::from_raw_parts(p, dim * dim);
            let entries: Vec<c64> = s.iter().map(|z| c64::new(z.re, z.im)).collect();
            DenseMatrix::from_row_major(dim, dim, &entries)
        };
        let fm = FormMatrices::new(read(t_hat)?, read(mass)?, None, SpaceId::new("ffi", dim))?;
        write_out(out, GkForms(fm))
    })
}

/// Loads forms from a matrix file (text or binary variant).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_forms_import(path: *const c_char, out: *mut *mut GkForms) -> GkStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure::Invalid("path is not UTF-8".into()))?;
        write_out(out, GkForms(import_matrices(Path::new(path))?))
    })
}

/// Dimension of the trial space; 0 for `NULL`.
///
/// # Safety
/// `forms` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_forms_dim(forms: *const GkForms) -> usize {
    forms.as_ref().map_or(0, |f| f.0.dim())
}

/// # Safety
/// `forms` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_forms_free(forms: *mut GkForms) {
    if !forms.is_null() {
        drop(Box::from_raw(forms));
    }
}

/// Galerkin eigenvalues `σ(T, L)`, ascending.
///
/// # Safety
/// `forms` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_spectrum_of_t(forms: *const GkForms, out: *mut *mut GkSpectrum) -> GkStatus {
    guard(|| {
        let fm = deref(forms, "forms")?;
        let values = eigenvalues_of_t(&fm.0)?.into_iter().map(|x| c64::new(x, 0.0)).collect();
        write_out(out, GkSpectrum(values))
    })
}

/// # Safety
/// `spectrum` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_spectrum_len(spectrum: *const GkSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the values into `out`, which must hold at least
/// `gk_spectrum_len` elements.
///
/// # Safety
/// `spectrum` must be a live handle and `out` valid for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn gk_spectrum_copy(spectrum: *const GkSpectrum, out: *mut GkComplex, cap: usize) -> GkStatus {
    guard(|| copy_values(&deref(spectrum, "spectrum")?.0, out, cap))
}

unsafe fn copy_values(values: &[c64], out: *mut GkComplex, cap: usize) -> Result<(), Failure> {
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    if cap < values.len() {
        return Err(Error::DimensionMismatch {
            context: "output buffer",
            expected: values.len(),
            found: cap,
        }
        .into());
    }
    for (i, z) in values.iter().enumerate() {
        *out.add(i) = (*z).into();
    }
    Ok(())
}

/// # Safety
/// `spectrum` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_spectrum_free(spectrum: *mut GkSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// `σₙ(z)`, the smallest whitened singular value of `T̂ − zM`.
///
/// # Safety
/// `forms` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_sigma_n(forms: *const GkForms, z: GkComplex, out: *mut f64) -> GkStatus {
    guard(|| {
        let fm = deref(forms, "forms")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = sigma_n(&fm.0, c64::new(z.re, z.im))?;
        Ok(())
    })
}

/// Two-stage run of a built-in problem: stage one on `coarse` with window
/// `(a, b)`, stage two on `fine`. In inverse mode `a`, `b` are in resolvent
/// coordinates `1/(λ − gamma)`; `gamma` is ignored in direct mode.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_two_stage(
    problem: GkProblem,
    coarse: usize,
    fine: usize,
    a: f64,
    b: f64,
    mode: GkMode,
    gamma: f64,
    out: *mut *mut GkRun,
) -> GkStatus {
    guard(|| {
        let (window, mode) = match mode {
            GkMode::Direct => (SpectralWindow::new(a, b)?, Mode::Direct),
            GkMode::Inverse => (SpectralWindow::inverse(a, b, gamma)?, Mode::Inverse),
        };
        let opts = TwoStageOptions {
            mode,
            residuals: true,
            ..TwoStageOptions::default()
        };
        write_out(out, GkRun(two_stage(&builtin(problem), &window, coarse, fine, &opts)?))
    })
}

/// Rank of `Q`; 0 for `NULL`.
///
/// # Safety
/// `run` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_run_rank(run: *const GkRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.rank)
}

/// Number of stage-two eigenvalues.
///
/// # Safety
/// `run` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_run_stage_two_len(run: *const GkRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.stage_two.len())
}

/// Copies the stage-two eigenvalues (window coordinates).
///
/// # Safety
/// `run` must be a live handle and `out` valid for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn gk_run_stage_two_copy(run: *const GkRun, out: *mut GkComplex, cap: usize) -> GkStatus {
    guard(|| copy_values(&deref(run, "run")?.0.stage_two, out, cap))
}

/// Number of entries in the pollution report.
///
/// # Safety
/// `run` must be `NULL` or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_run_pollution_len(run: *const GkRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.pollution.len())
}

/// Stage-one value `index` of the pollution report and whether it was
/// confirmed as genuine.
///
/// # Safety
/// `run` must be a live handle; `value` and `genuine` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gk_run_pollution_entry(
    run: *const GkRun,
    index: usize,
    value: *mut f64,
    genuine: *mut bool,
) -> GkStatus {
    guard(|| {
        let r = deref(run, "run")?;
        if value.is_null() || genuine.is_null() {
            return Err(Failure::Null("value/genuine"));
        }
        let e = r
            .0
            .pollution
            .get(index)
            .ok_or_else(|| Failure::Invalid(format!("index {index} out of range ({})", r.0.pollution.len())))?;
        *value = e.value;
        *genuine = e.verdict.is_genuine();
        Ok(())
    })
}

/// JSON summary of a run (clusters, pollution, residuals). Release with
/// [`gk_string_free`]. Returns `NULL` on failure.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gk_run_to_json(run: *const GkRun) -> *mut c_char {
    let mut text = None;
    let status = guard(|| {
        let r = deref(run, "run")?;
        let s = serde_json::to_string(&r.0).map_err(|e| Failure::Invalid(e.to_string()))?;
        text = Some(CString::new(s).map_err(|e| Failure::Invalid(e.to_string()))?);
        Ok(())
    });
    match (status, text) {
        (GkStatus::Ok, Some(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be `NULL` or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `run` must be `NULL` or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gk_run_free(run: *mut GkRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
