//! C ABI over the hnbr core: opaque handles, status codes, no exceptions
//! across the boundary. See include/hnbr.h for the matching declarations.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hnbr::model::{Coefficients, Dataset};
use hnbr::solver::{self, PenaltyConfig, Solution};
use hnbr::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HnbrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DataError = 4,
    NumericError = 5,
    BudgetExceeded = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend_from_slice(msg.as_bytes());
        buf.push(0);
    });
}

fn status_of(err: &Error) -> HnbrStatus {
    match err {
        Error::InvalidArgument(_) => HnbrStatus::InvalidArgument,
        Error::DimensionMismatch(_) => HnbrStatus::DimensionMismatch,
        Error::Data { .. } | Error::Io(_) | Error::Json(_) => HnbrStatus::DataError,
        Error::Numeric(_) => HnbrStatus::NumericError,
        Error::BudgetExceeded(_) => HnbrStatus::BudgetExceeded,
    }
}

fn fail(err: Error) -> HnbrStatus {
    let code = status_of(&err);
    set_error(&err.to_string());
    code
}

/// Copy the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full length including the terminator.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn hnbr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if msg.is_empty() {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        }
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Opaque dataset handle.
pub struct HnbrDataset(Dataset);

/// Opaque fit handle.
pub struct HnbrFit {
    solution: Solution,
    p: usize,
}

/// Solver options mirrored across the ABI. Booleans are 0/1 ints.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HnbrFitOptions {
    pub lambda1: f64,
    pub lambda2: f64,
    pub tol: f64,
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub unpenalized_intercepts: i32,
    pub standardize: i32,
    pub constant_dispersion: i32,
    pub extra_starts: usize,
    pub seed: u64,
}

fn default_options() -> HnbrFitOptions {
    let d = PenaltyConfig::default();
    HnbrFitOptions {
        lambda1: d.lambda1,
        lambda2: d.lambda2,
        tol: d.tol,
        kkt_tol: d.kkt_tol,
        max_iter: d.max_iter,
        unpenalized_intercepts: 0,
        standardize: 0,
        constant_dispersion: 0,
        extra_starts: d.extra_starts,
        seed: d.seed,
    }
}

fn to_config(o: &HnbrFitOptions) -> PenaltyConfig {
    PenaltyConfig {
        lambda1: o.lambda1,
        lambda2: o.lambda2,
        tol: o.tol,
        kkt_tol: o.kkt_tol,
        max_iter: o.max_iter,
        unpenalized_intercepts: o.unpenalized_intercepts != 0,
        standardize: o.standardize != 0,
        extra_starts: o.extra_starts,
        seed: o.seed,
        ..PenaltyConfig::default()
    }
}

/// Fill `out` with the library defaults.
///
/// # Safety
/// `out` must point to writable HnbrFitOptions storage.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_options_default(out: *mut HnbrFitOptions) -> HnbrStatus {
    if out.is_null() {
        set_error("hnbr_fit_options_default: out is null");
        return HnbrStatus::NullPointer;
    }
    *out = default_options();
    HnbrStatus::Ok
}

/// Build a dataset from a row-major n x p design and n counts. The data are
/// copied; the caller keeps ownership of the input buffers.
///
/// # Safety
/// `x` must point to n*p doubles, `y` to n uint64 counts, `out` to a writable
/// pointer slot.
#[no_mangle]
pub unsafe extern "C" fn hnbr_dataset_new(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const u64,
    out: *mut *mut HnbrDataset,
) -> HnbrStatus {
    if x.is_null() || y.is_null() || out.is_null() {
        set_error("hnbr_dataset_new: null pointer argument");
        return HnbrStatus::NullPointer;
    }
    if n == 0 || p == 0 || n.checked_mul(p).is_none() {
        set_error("hnbr_dataset_new: n and p must be positive and n*p must not overflow");
        return HnbrStatus::InvalidArgument;
    }
    let xs = slice::from_raw_parts(x, n * p).to_vec();
    let ys = slice::from_raw_parts(y, n).to_vec();
    match catch_unwind(AssertUnwindSafe(|| Dataset::new(xs, n, p, ys))) {
        Ok(Ok(ds)) => {
            *out = Box::into_raw(Box::new(HnbrDataset(ds)));
            HnbrStatus::Ok
        }
        Ok(Err(e)) => fail(e),
        Err(_) => {
            set_error("hnbr_dataset_new: internal panic");
            HnbrStatus::Panic
        }
    }
}

/// Release a dataset handle. Null is a no-op.
///
/// # Safety
/// `ds` must be a pointer returned by hnbr_dataset_new, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hnbr_dataset_free(ds: *mut HnbrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of rows / feature columns of a dataset.
///
/// # Safety
/// `ds` must be a live dataset handle; `n`/`p` writable or null.
#[no_mangle]
pub unsafe extern "C" fn hnbr_dataset_shape(
    ds: *const HnbrDataset,
    n: *mut usize,
    p: *mut usize,
) -> HnbrStatus {
    if ds.is_null() {
        set_error("hnbr_dataset_shape: ds is null");
        return HnbrStatus::NullPointer;
    }
    let d = &(*ds).0;
    if !n.is_null() {
        *n = d.n();
    }
    if !p.is_null() {
        *p = d.p();
    }
    HnbrStatus::Ok
}

/// Fit the model. With `constant_dispersion` nonzero the dispersion block is
/// replaced by a single unpenalized scalar (classical NB regression).
///
/// # Safety
/// `ds` must be a live dataset handle, `opts` null (defaults) or valid,
/// `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit(
    ds: *const HnbrDataset,
    opts: *const HnbrFitOptions,
    out: *mut *mut HnbrFit,
) -> HnbrStatus {
    if ds.is_null() || out.is_null() {
        set_error("hnbr_fit: null pointer argument");
        return HnbrStatus::NullPointer;
    }
    let o = if opts.is_null() {
        default_options()
    } else {
        *opts
    };
    let data = &(*ds).0;
    let cfg = to_config(&o);
    let run = || -> hnbr::Result<Solution> {
        if o.constant_dispersion != 0 {
            solver::fit_constant_dispersion(data, &cfg)
        } else {
            solver::fit(data, &cfg)
        }
    };
    match catch_unwind(AssertUnwindSafe(run)) {
        Ok(Ok(solution)) => {
            *out = Box::into_raw(Box::new(HnbrFit {
                solution,
                p: data.p(),
            }));
            HnbrStatus::Ok
        }
        Ok(Err(e)) => fail(e),
        Err(_) => {
            set_error("hnbr_fit: internal panic");
            HnbrStatus::Panic
        }
    }
}

/// Release a fit handle. Null is a no-op.
///
/// # Safety
/// `fit` must be a pointer returned by hnbr_fit, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_free(fit: *mut HnbrFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

unsafe fn with_fit<T>(
    fit: *const HnbrFit,
    out: *mut T,
    name: &str,
    get: impl FnOnce(&HnbrFit) -> T,
) -> HnbrStatus {
    if fit.is_null() || out.is_null() {
        set_error(name);
        return HnbrStatus::NullPointer;
    }
    *out = get(&*fit);
    HnbrStatus::Ok
}

/// Feature count per block of a fit.
///
/// # Safety
/// `fit` must be a live fit handle, `p` writable.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_num_features(fit: *const HnbrFit, p: *mut usize) -> HnbrStatus {
    with_fit(fit, p, "hnbr_fit_num_features: null pointer", |f| f.p)
}

/// Copy one coefficient block (`block` = 1 mean, 2 dispersion) into `buf`.
///
/// # Safety
/// `fit` must be a live fit handle; `buf` must hold `len` >= p doubles.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_coefficients(
    fit: *const HnbrFit,
    block: u32,
    buf: *mut f64,
    len: usize,
) -> HnbrStatus {
    if fit.is_null() || buf.is_null() {
        set_error("hnbr_fit_coefficients: null pointer argument");
        return HnbrStatus::NullPointer;
    }
    let f = &*fit;
    let theta: &Coefficients = &f.solution.theta;
    let src = match block {
        1 => &theta.theta1,
        2 => &theta.theta2,
        _ => {
            set_error("hnbr_fit_coefficients: block must be 1 or 2");
            return HnbrStatus::InvalidArgument;
        }
    };
    if len < src.len() {
        set_error("hnbr_fit_coefficients: buffer too small");
        return HnbrStatus::InvalidArgument;
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    HnbrStatus::Ok
}

/// Penalized objective at the solution.
///
/// # Safety
/// `fit` live, `v` writable.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_objective(fit: *const HnbrFit, v: *mut f64) -> HnbrStatus {
    with_fit(fit, v, "hnbr_fit_objective: null pointer", |f| {
        f.solution.objective
    })
}

/// Stationarity (KKT) residual at the solution.
///
/// # Safety
/// `fit` live, `v` writable.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_kkt_residual(fit: *const HnbrFit, v: *mut f64) -> HnbrStatus {
    with_fit(fit, v, "hnbr_fit_kkt_residual: null pointer", |f| {
        f.solution.kkt_residual
    })
}

/// 1 if the solver met its tolerances, else 0.
///
/// # Safety
/// `fit` live, `v` writable.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_converged(fit: *const HnbrFit, v: *mut i32) -> HnbrStatus {
    with_fit(fit, v, "hnbr_fit_converged: null pointer", |f| {
        f.solution.converged as i32
    })
}

/// Proximal-gradient iterations used.
///
/// # Safety
/// `fit` live, `v` writable.
#[no_mangle]
pub unsafe extern "C" fn hnbr_fit_iterations(fit: *const HnbrFit, v: *mut usize) -> HnbrStatus {
    with_fit(fit, v, "hnbr_fit_iterations: null pointer", |f| {
        f.solution.iterations
    })
}
