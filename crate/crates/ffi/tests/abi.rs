//! Exercises the C ABI from Rust: handle lifecycle, error paths, and the
//! mini-grammar pass-through.

use pursuitlab_ffi::*;
use std::ffi::CString;
use std::ptr;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn generate_recover_roundtrip() {
    unsafe {
        let mut inst: *mut PursuitInstance = ptr::null_mut();
        let kind = c("gaussian");
        let status =
            pursuit_instance_generate(20, 60, 3, kind.as_ptr(), 0.0, 99, 0, &mut inst);
        assert_eq!(status, PursuitStatus::Ok);
        let (mut m, mut n, mut s) = (0u32, 0u32, 0u32);
        assert_eq!(
            pursuit_instance_dims(inst, &mut m, &mut n, &mut s),
            PursuitStatus::Ok
        );
        assert_eq!((m, n, s), (20, 60, 3));

        let algo = c("stp:mu=2");
        let mut rec: *mut PursuitRecovery = ptr::null_mut();
        let status = pursuit_recover(inst, algo.as_ptr(), 0, 0, 0.0, &mut rec);
        assert_eq!(status, PursuitStatus::Ok);
        assert!(pursuit_recovery_converged(rec));
        assert!(pursuit_recovery_iterations(rec) >= 1);
        assert!(pursuit_recovery_residual_norm(rec) < 1e-8);

        let mut estimate = vec![0.0f64; n as usize];
        assert_eq!(
            pursuit_recovery_estimate(rec, estimate.as_mut_ptr(), estimate.len()),
            PursuitStatus::Ok
        );
        assert!(estimate.iter().filter(|v| **v != 0.0).count() <= 3);

        let mut err = f64::NAN;
        assert_eq!(
            pursuit_recovery_relative_error(rec, inst, &mut err),
            PursuitStatus::Ok
        );
        assert!(err < 1e-10, "relative error {err}");

        pursuit_recovery_free(rec);
        pursuit_instance_free(inst);
    }
}

#[test]
fn save_load_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("inst.bin").to_str().unwrap());
    unsafe {
        let mut inst: *mut PursuitInstance = ptr::null_mut();
        let kind = c("cars");
        assert_eq!(
            pursuit_instance_generate(10, 30, 2, kind.as_ptr(), 0.05, 7, 3, &mut inst),
            PursuitStatus::Ok
        );
        assert_eq!(pursuit_instance_save(inst, path.as_ptr()), PursuitStatus::Ok);
        let mut back: *mut PursuitInstance = ptr::null_mut();
        assert_eq!(
            pursuit_instance_load(path.as_ptr(), &mut back),
            PursuitStatus::Ok
        );
        let (mut m, mut n, mut s) = (0u32, 0u32, 0u32);
        assert_eq!(
            pursuit_instance_dims(back, &mut m, &mut n, &mut s),
            PursuitStatus::Ok
        );
        assert_eq!((m, n, s), (10, 30, 2));
        pursuit_instance_free(inst);
        pursuit_instance_free(back);
    }
}

#[test]
fn error_paths_set_retrievable_messages() {
    unsafe {
        let mut inst: *mut PursuitInstance = ptr::null_mut();
        // Oversampled request is invalid.
        let kind = c("gaussian");
        let status = pursuit_instance_generate(30, 20, 2, kind.as_ptr(), 0.0, 1, 0, &mut inst);
        assert_eq!(status, PursuitStatus::InvalidArgument);
        let needed = pursuit_last_error(ptr::null_mut(), 0);
        assert!(needed > 1);
        let mut buf = vec![0i8; needed];
        pursuit_last_error(buf.as_mut_ptr(), buf.len());
        let msg = std::ffi::CStr::from_ptr(buf.as_ptr()).to_string_lossy();
        assert!(msg.contains("m < n"), "message: {msg}");

        // Unknown signal kind.
        let bad = c("bernoulli");
        assert_eq!(
            pursuit_instance_generate(10, 30, 2, bad.as_ptr(), 0.0, 1, 0, &mut inst),
            PursuitStatus::InvalidArgument
        );

        // Null pointers are caught, not dereferenced.
        assert_eq!(
            pursuit_instance_generate(10, 30, 2, ptr::null(), 0.0, 1, 0, &mut inst),
            PursuitStatus::NullPointer
        );
        assert_eq!(
            pursuit_instance_load(ptr::null(), &mut inst),
            PursuitStatus::NullPointer
        );
        let mut rec: *mut PursuitRecovery = ptr::null_mut();
        let algo = c("stp");
        assert_eq!(
            pursuit_recover(ptr::null(), algo.as_ptr(), 0, 0, 0.0, &mut rec),
            PursuitStatus::NullPointer
        );

        // Missing file is an i/o failure.
        let missing = c("/nonexistent/inst.bin");
        assert_eq!(
            pursuit_instance_load(missing.as_ptr(), &mut inst),
            PursuitStatus::IoError
        );

        // Bad algorithm grammar.
        let mut good: *mut PursuitInstance = ptr::null_mut();
        assert_eq!(
            pursuit_instance_generate(10, 30, 2, kind.as_ptr(), 0.0, 1, 0, &mut good),
            PursuitStatus::Ok
        );
        let bad_algo = c("sp:mu=2");
        assert_eq!(
            pursuit_recover(good, bad_algo.as_ptr(), 0, 0, 0.0, &mut rec),
            PursuitStatus::InvalidArgument
        );
        pursuit_instance_free(good);
    }
}

#[test]
fn theory_functions_are_plain_values() {
    let r = pursuit_theory_rho(1.0, 0.5340);
    assert!((r - 1.0).abs() <= 2e-3);
    assert!((pursuit_theory_tau(1.0, 0.0) - (std::f64::consts::SQRT_2 + 1.0)).abs() < 1e-12);
    assert!((pursuit_theory_delta_max(1.0) - 0.5340).abs() <= 5e-4);
    assert!(pursuit_theory_rho(-1.0, 0.3).is_nan());
    assert!(pursuit_theory_tau(1.0, 0.6).is_nan());
}
