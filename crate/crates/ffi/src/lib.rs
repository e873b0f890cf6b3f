//! C ABI over the sparse-recovery library.
//!
//! Objects cross the boundary as opaque handles created and destroyed by
//! paired functions; every fallible call returns a [`PursuitStatus`] and
//! stores a message retrievable with [`pursuit_last_error`]. No call
//! unwinds across the boundary.

use pursuitlab::algo::{run_algorithm, StoppingCriteria};
use pursuitlab::harness::Method;
use pursuitlab::l1::basis_pursuit;
use pursuitlab::linalg::norm2;
use pursuitlab::problem::{build_instance, MeasurementInstance, SignalKind};
use pursuitlab::rng::RngStream;
use pursuitlab::theory;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result code of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PursuitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Utf8Error = 3,
    IoError = 4,
    RuntimeError = 5,
}

/// Opaque measurement problem: matrix, observation, optional ground
/// truth.
pub struct PursuitInstance {
    inner: MeasurementInstance,
}

/// Opaque recovery outcome.
pub struct PursuitRecovery {
    estimate: Vec<f64>,
    iterations: u32,
    converged: bool,
    residual_norm: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn guard<F: FnOnce() -> PursuitStatus>(f: F) -> PursuitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            PursuitStatus::RuntimeError
        }
    }
}

fn classify(err: &pursuitlab::Error) -> PursuitStatus {
    match err {
        pursuitlab::Error::InvalidArgument(_) => PursuitStatus::InvalidArgument,
        pursuitlab::Error::Io { .. } => PursuitStatus::IoError,
        pursuitlab::Error::Format { .. } => PursuitStatus::IoError,
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, PursuitStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(PursuitStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        PursuitStatus::Utf8Error
    })
}

/// Copies the message of the most recent failure on this thread into
/// `buffer` (NUL-terminated, truncated to `len`). Returns the full
/// message length including the terminator; call with a null buffer to
/// size one.
///
/// # Safety
/// A non-null `buffer` must be writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pursuit_last_error(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buffer.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, n);
            // Always leave a terminator.
            *buffer.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Generates a seeded instance: an `m x n` Gaussian measurement matrix,
/// an `s`-sparse signal of the named kind ("gaussian" or "cars"), and the
/// observation (noiseless when `noise_level` is zero).
///
/// # Safety
/// `signal_kind` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn pursuit_instance_generate(
    m: u32,
    n: u32,
    s: u32,
    signal_kind: *const c_char,
    noise_level: f64,
    master_seed: u64,
    stream_id: u64,
    out: *mut *mut PursuitInstance,
) -> PursuitStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return PursuitStatus::NullPointer;
        }
        let kind = match read_str(signal_kind).and_then(|s| {
            SignalKind::parse(s).map_err(|e| {
                set_error(&e.to_string());
                PursuitStatus::InvalidArgument
            })
        }) {
            Ok(k) => k,
            Err(status) => return status,
        };
        match build_instance(
            m as usize,
            n as usize,
            s as usize,
            kind,
            noise_level,
            RngStream::new(master_seed, stream_id),
        ) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PursuitInstance { inner }));
                PursuitStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

/// Loads an instance container written by `pursuit_instance_save` or the
/// CLI.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn pursuit_instance_load(
    path: *const c_char,
    out: *mut *mut PursuitInstance,
) -> PursuitStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return PursuitStatus::NullPointer;
        }
        let path = match read_str(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match MeasurementInstance::load(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(PursuitInstance { inner }));
                PursuitStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

/// Writes the instance container to `path`.
///
/// # Safety
/// `inst` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pursuit_instance_save(
    inst: *const PursuitInstance,
    path: *const c_char,
) -> PursuitStatus {
    guard(|| {
        let Some(inst) = inst.as_ref() else {
            set_error("null instance");
            return PursuitStatus::NullPointer;
        };
        let path = match read_str(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match inst.inner.save(path) {
            Ok(()) => PursuitStatus::Ok,
            Err(e) => {
                set_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

/// Reports the dimensions and ground-truth sparsity (0 when the instance
/// carries no truth). Null output pointers are skipped.
///
/// # Safety
/// `inst` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_instance_dims(
    inst: *const PursuitInstance,
    m: *mut u32,
    n: *mut u32,
    s: *mut u32,
) -> PursuitStatus {
    guard(|| {
        let Some(inst) = inst.as_ref() else {
            set_error("null instance");
            return PursuitStatus::NullPointer;
        };
        if !m.is_null() {
            *m = inst.inner.rows() as u32;
        }
        if !n.is_null() {
            *n = inst.inner.cols() as u32;
        }
        if !s.is_null() {
            *s = inst
                .inner
                .truth
                .as_ref()
                .map(|t| t.sparsity() as u32)
                .unwrap_or(0);
        }
        PursuitStatus::Ok
    })
}

/// Releases an instance handle. Null is ignored.
///
/// # Safety
/// `inst` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pursuit_instance_free(inst: *mut PursuitInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Runs one recovery. `algorithm` uses the mini-grammar of the CLI
/// (`"stp:mu=2.5"`, `"sp"`, `"l1"`, ...); `sparsity` zero means "use the
/// ground-truth sparsity"; `max_iterations` zero selects the default
/// budget (200) and `residual_tolerance` at or below zero the default
/// 1e-10.
///
/// # Safety
/// `inst` must be a live handle, `algorithm` a valid NUL-terminated
/// string, and `out` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recover(
    inst: *const PursuitInstance,
    algorithm: *const c_char,
    sparsity: u32,
    max_iterations: u32,
    residual_tolerance: f64,
    out: *mut *mut PursuitRecovery,
) -> PursuitStatus {
    guard(|| {
        let Some(inst) = inst.as_ref() else {
            set_error("null instance");
            return PursuitStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return PursuitStatus::NullPointer;
        }
        let algo = match read_str(algorithm) {
            Ok(a) => a,
            Err(status) => return status,
        };
        let methods = match Method::parse_list(algo) {
            Ok(m) => m,
            Err(e) => {
                set_error(&e.to_string());
                return PursuitStatus::InvalidArgument;
            }
        };
        if methods.len() != 1 {
            set_error("expected a single algorithm");
            return PursuitStatus::InvalidArgument;
        }
        let s = if sparsity > 0 {
            sparsity as usize
        } else {
            match inst.inner.truth.as_ref() {
                Some(t) => t.sparsity(),
                None => {
                    set_error("sparsity 0 needs an instance with ground truth");
                    return PursuitStatus::InvalidArgument;
                }
            }
        };
        let stop = StoppingCriteria {
            max_iterations: if max_iterations > 0 {
                max_iterations as usize
            } else {
                200
            },
            residual_tolerance: if residual_tolerance > 0.0 {
                residual_tolerance
            } else {
                1e-10
            },
            native_rule_enabled: false,
        };
        let outcome = match &methods[0] {
            Method::Pursuit(spec) => run_algorithm(spec, &inst.inner, s, &stop).map(|res| {
                let rnorm = res.residual_history.last().copied().unwrap_or(0.0);
                PursuitRecovery {
                    estimate: res.estimate,
                    iterations: res.iterations as u32,
                    converged: res.converged,
                    residual_norm: rnorm,
                }
            }),
            Method::L1(cfg) => basis_pursuit(&inst.inner.phi, &inst.inner.y, cfg).map(|res| {
                let ax = inst.inner.phi.mul_vec(&res.estimate);
                let rnorm = ax
                    .iter()
                    .zip(&inst.inner.y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                PursuitRecovery {
                    estimate: res.estimate,
                    iterations: res.iterations as u32,
                    converged: res.converged,
                    residual_norm: rnorm,
                }
            }),
        };
        match outcome {
            Ok(rec) => {
                *out = Box::into_raw(Box::new(rec));
                PursuitStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

/// Number of iterations the run committed.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recovery_iterations(rec: *const PursuitRecovery) -> u32 {
    rec.as_ref().map(|r| r.iterations).unwrap_or(0)
}

/// Whether the residual criterion was met.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recovery_converged(rec: *const PursuitRecovery) -> bool {
    rec.as_ref().map(|r| r.converged).unwrap_or(false)
}

/// Final residual norm `||y - Phi x||`.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recovery_residual_norm(rec: *const PursuitRecovery) -> f64 {
    rec.as_ref().map(|r| r.residual_norm).unwrap_or(f64::NAN)
}

/// Copies the length-N estimate into `buffer` (which must hold exactly N
/// doubles; query N via `pursuit_instance_dims`).
///
/// # Safety
/// `rec` must be a live handle and `buffer` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recovery_estimate(
    rec: *const PursuitRecovery,
    buffer: *mut f64,
    len: usize,
) -> PursuitStatus {
    guard(|| {
        let Some(rec) = rec.as_ref() else {
            set_error("null recovery");
            return PursuitStatus::NullPointer;
        };
        if buffer.is_null() {
            set_error("null buffer");
            return PursuitStatus::NullPointer;
        }
        if len != rec.estimate.len() {
            set_error("buffer length does not match the signal length");
            return PursuitStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(rec.estimate.as_ptr(), buffer, len);
        PursuitStatus::Ok
    })
}

/// Relative l2 error of the estimate against the instance's ground
/// truth.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recovery_relative_error(
    rec: *const PursuitRecovery,
    inst: *const PursuitInstance,
    out: *mut f64,
) -> PursuitStatus {
    guard(|| {
        let (Some(rec), Some(inst)) = (rec.as_ref(), inst.as_ref()) else {
            set_error("null handle");
            return PursuitStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return PursuitStatus::NullPointer;
        }
        let Some(truth) = inst.inner.truth.as_ref() else {
            set_error("instance carries no ground truth");
            return PursuitStatus::InvalidArgument;
        };
        if truth.len() != rec.estimate.len() {
            set_error("recovery and instance dimensions do not match");
            return PursuitStatus::InvalidArgument;
        }
        let diff: f64 = rec
            .estimate
            .iter()
            .zip(truth.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        *out = diff / norm2(truth.values());
        PursuitStatus::Ok
    })
}

/// Releases a recovery handle. Null is ignored.
///
/// # Safety
/// `rec` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pursuit_recovery_free(rec: *mut PursuitRecovery) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Contraction factor of the thresholding-pursuit error recursion; NaN
/// when the arguments are out of range.
#[no_mangle]
pub extern "C" fn pursuit_theory_rho(mu: f64, delta: f64) -> f64 {
    theory::rho(mu, delta).unwrap_or(f64::NAN)
}

/// Noise amplification constant; NaN when undefined (no contraction).
#[no_mangle]
pub extern "C" fn pursuit_theory_tau(mu: f64, delta: f64) -> f64 {
    theory::tau(mu, delta).unwrap_or(f64::NAN)
}

/// Largest isometry constant with a contracting recursion at weight
/// `mu`; NaN when `mu` is out of range.
#[no_mangle]
pub extern "C" fn pursuit_theory_delta_max(mu: f64) -> f64 {
    theory::delta_max(mu).unwrap_or(f64::NAN)
}
