//! C ABI over the `l1pca` solvers.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible entry point returns an
//! [`L1pcaStatus`] and records a message readable with
//! [`l1pca_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use l1pca::data::{read_dense, read_sparse_labeled};
use l1pca::eval::tev;
use l1pca::linalg::{DataMatrix, Mat};
use l1pca::model::objective_l1;
use l1pca::solvers::{initial_point, solve, Schedule};
use l1pca::{Error, Method, ProblemInstance, SolveResult, SolverConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum L1pcaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    Precondition = 4,
    InvalidConfig = 5,
    TheoremCondition = 6,
    Diverged = 7,
    DegenerateUpdate = 8,
    Refused = 9,
    UndefinedMetric = 10,
    Parse = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Values accepted in [`L1pcaOptions::method`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum L1pcaMethod {
    Pame = 0,
    Pam = 1,
    Fpm = 2,
    Pdcae = 3,
    Ipalm = 4,
    Gipalm = 5,
}

/// Solver settings. Fill with [`l1pca_options_default`] before editing.
/// `alpha_star` and `beta_star` at or below zero select their defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct L1pcaOptions {
    pub method: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub theorem_mode: bool,
}

/// A data matrix (`d × n`, samples in columns) and a target dimension `K`.
pub struct L1pcaProblem {
    inst: ProblemInstance,
}

/// Final iterates and trace of one solver run.
pub struct L1pcaResult {
    res: SolveResult,
    objective: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> L1pcaStatus {
    match e {
        Error::InvalidInput(_) => L1pcaStatus::InvalidInput,
        Error::DimensionMismatch { .. } => L1pcaStatus::DimensionMismatch,
        Error::Precondition(_) => L1pcaStatus::Precondition,
        Error::InvalidConfig(_) => L1pcaStatus::InvalidConfig,
        Error::TheoremCondition(_) => L1pcaStatus::TheoremCondition,
        Error::Diverged { .. } => L1pcaStatus::Diverged,
        Error::DegenerateUpdate { .. } => L1pcaStatus::DegenerateUpdate,
        Error::Refused(_) => L1pcaStatus::Refused,
        Error::UndefinedMetric(_) => L1pcaStatus::UndefinedMetric,
        Error::Parse { .. } | Error::MalformedFile { .. } | Error::Json(_) => L1pcaStatus::Parse,
        Error::Io(_) => L1pcaStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), L1pcaStatus>) -> L1pcaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => L1pcaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            L1pcaStatus::Panic
        }
    }
}

fn fail(e: Error) -> L1pcaStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> L1pcaStatus {
    set_error(format!("{what} is null"));
    L1pcaStatus::NullPointer
}

fn method_of(code: u32) -> Result<Method, L1pcaStatus> {
    Method::ALL.get(code as usize).copied().ok_or_else(|| {
        set_error(format!("unknown method code {code}"));
        L1pcaStatus::InvalidConfig
    })
}

fn config_of(o: &L1pcaOptions) -> Result<SolverConfig, L1pcaStatus> {
    let mut cfg = SolverConfig::new(method_of(o.method)?).with_seed(o.seed);
    cfg.alpha = Schedule::Constant(o.alpha);
    cfg.beta = Schedule::Constant(o.beta);
    cfg.gamma = Schedule::Constant(o.gamma);
    cfg.alpha_star = (o.alpha_star > 0.0).then_some(o.alpha_star);
    cfg.beta_star = (o.beta_star > 0.0).then_some(o.beta_star);
    cfg.tol = o.tol;
    cfg.max_iter = o.max_iter;
    cfg.theorem_mode = o.theorem_mode;
    Ok(cfg)
}

fn copy_out(m: &Mat, out: *mut f64, len: usize) -> Result<(), L1pcaStatus> {
    let src = m.as_slice();
    if out.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(L1pcaStatus::BufferTooSmall);
    }
    // SAFETY: the caller guarantees `out` points to `len >= src.len()` writable doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn l1pca_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn l1pca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings for `method` (an [`L1pcaMethod`] value).
///
/// # Safety
/// `out` must be null or point to writable memory for one `L1pcaOptions`.
#[no_mangle]
pub unsafe extern "C" fn l1pca_options_default(method: u32, out: *mut L1pcaOptions) -> L1pcaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SolverConfig::new(method_of(method)?);
        let at0 = |s: &Schedule| s.at(0);
        let opts = L1pcaOptions {
            method,
            alpha: at0(&cfg.alpha),
            beta: at0(&cfg.beta),
            gamma: at0(&cfg.gamma),
            alpha_star: 0.0,
            beta_star: 0.0,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
            theorem_mode: cfg.theorem_mode,
        };
        // SAFETY: checked non-null above; caller guarantees it is writable.
        unsafe { out.write(opts) };
        Ok(())
    })
}

/// Problem from a column-major `rows × cols` array (`d × n`, samples in columns).
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn l1pca_problem_new_dense(
    data: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    out: *mut *mut L1pcaProblem,
) -> L1pcaStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| fail(Error::InvalidInput("size overflow".into())))?;
        // SAFETY: the caller guarantees `rows * cols` readable doubles.
        let values = unsafe { std::slice::from_raw_parts(data, len) }.to_vec();
        let m = Mat::from_col_major(rows, cols, values).map_err(fail)?;
        let inst = ProblemInstance::new(DataMatrix::Dense(m), k).map_err(fail)?;
        // SAFETY: checked non-null above.
        unsafe { out.write(Box::into_raw(Box::new(L1pcaProblem { inst }))) };
        Ok(())
    })
}

/// Problem read from a file: `.bin` dense binary, otherwise sparse labeled text.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn l1pca_problem_from_file(
    path: *const c_char,
    k: usize,
    out: *mut *mut L1pcaProblem,
) -> L1pcaStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: the caller guarantees a NUL-terminated string.
        let s = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| fail(Error::InvalidInput("path is not UTF-8".into())))?;
        let p = Path::new(s);
        let inst = if p.extension().is_some_and(|e| e == "bin") {
            ProblemInstance::new(DataMatrix::Dense(read_dense(p).map_err(fail)?), k)
        } else {
            let data = read_sparse_labeled(p, None).map_err(fail)?;
            data.into_instance(k)
        }
        .map_err(fail)?;
        // SAFETY: checked non-null above.
        unsafe { out.write(Box::into_raw(Box::new(L1pcaProblem { inst }))) };
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn l1pca_problem_free(problem: *mut L1pcaProblem) {
    if !problem.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Writes `d`, `n` and `K`; any output pointer may be null.
///
/// # Safety
/// `problem` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn l1pca_problem_dims(
    problem: *const L1pcaProblem,
    d: *mut usize,
    n: *mut usize,
    k: *mut usize,
) -> L1pcaStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or null.
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        for (dst, v) in [(d, p.inst.d()), (n, p.inst.n()), (k, p.inst.k)] {
            if !dst.is_null() {
                // SAFETY: non-null outputs are writable per the contract.
                unsafe { dst.write(v) };
            }
        }
        Ok(())
    })
}

/// Runs the configured solver from the start point seeded by `options.seed`.
/// Reaching `max_iter` is not an error; check [`l1pca_result_converged`].
///
/// # Safety
/// `problem` and `options` must be valid; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn l1pca_solve(
    problem: *const L1pcaProblem,
    options: *const L1pcaOptions,
    out: *mut *mut L1pcaResult,
) -> L1pcaStatus {
    guard(|| {
        // SAFETY: the caller guarantees live pointers or null.
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        // SAFETY: as above.
        let o = unsafe { options.as_ref() }.ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config_of(o)?;
        let (p0, q0) = initial_point(&p.inst, o.seed).map_err(fail)?;
        let res = solve(&p.inst, &cfg, &p0, &q0).map_err(fail)?;
        let objective = objective_l1(&p.inst.x, &res.q_final).map_err(fail)?;
        // SAFETY: checked non-null above.
        unsafe { out.write(Box::into_raw(Box::new(L1pcaResult { res, objective }))) };
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_free(result: *mut L1pcaResult) {
    if !result.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Iterations performed; 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_iterations(result: *const L1pcaResult) -> usize {
    // SAFETY: the caller guarantees a live handle or null.
    unsafe { result.as_ref() }.map_or(0, |r| r.res.iterations)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_converged(result: *const L1pcaResult) -> bool {
    // SAFETY: the caller guarantees a live handle or null.
    unsafe { result.as_ref() }.is_some_and(|r| r.res.converged)
}

/// `‖XᵀQ‖₁` at the final iterate; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_objective(result: *const L1pcaResult) -> f64 {
    // SAFETY: the caller guarantees a live handle or null.
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.objective)
}

/// Copies the final `Q` (`d × K`, column-major) into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_q(result: *const L1pcaResult, out: *mut f64, len: usize) -> L1pcaStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or null.
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        copy_out(&r.res.q_final, out, len)
    })
}

/// Copies the final sign matrix `P` (`n × K`, column-major) into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_p(result: *const L1pcaResult, out: *mut f64, len: usize) -> L1pcaStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or null.
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        copy_out(&r.res.p_final, out, len)
    })
}

/// Number of trace records (iterations plus the start point).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_trace_len(result: *const L1pcaResult) -> usize {
    // SAFETY: the caller guarantees a live handle or null.
    unsafe { result.as_ref() }.map_or(0, |r| r.res.trace.len())
}

/// Copies the `h` value of every trace record into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn l1pca_result_h_values(result: *const L1pcaResult, out: *mut f64, len: usize) -> L1pcaStatus {
    guard(|| {
        // SAFETY: the caller guarantees a live handle or null.
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        let h: Vec<f64> = r.res.trace.records.iter().map(|rec| rec.h_value).collect();
        copy_out(&Mat::column_vector(&h), out, len)
    })
}

/// Total explained variation of the final `Q` on `problem`.
///
/// # Safety
/// `problem` and `result` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn l1pca_tev(
    problem: *const L1pcaProblem,
    result: *const L1pcaResult,
    out: *mut f64,
) -> L1pcaStatus {
    guard(|| {
        // SAFETY: the caller guarantees live handles or null.
        let p = unsafe { problem.as_ref() }.ok_or_else(|| null("problem"))?;
        // SAFETY: as above.
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = tev(&p.inst.x, &r.res.q_final).map_err(fail)?;
        // SAFETY: checked non-null above.
        unsafe { out.write(v) };
        Ok(())
    })
}
