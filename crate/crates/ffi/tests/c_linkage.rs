//! Compiles and runs a real C program against the generated header and
//! the static library, proving the ABI surface works outside Rust.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    let lib_dir = manifest.join("../../target/debug");
    let staticlib = lib_dir.join("libpursuitlab_ffi.a");
    assert!(
        staticlib.exists(),
        "static library missing at {}",
        staticlib.display()
    );
    assert!(header_dir.join("pursuitlab.h").exists(), "header missing");

    let dir = tempfile::tempdir().unwrap();
    let c_src = dir.path().join("smoke.c");
    std::fs::write(
        &c_src,
        r#"
#include "pursuitlab.h"
#include <math.h>
#include <stdio.h>

int main(void) {
    PursuitInstance *inst = NULL;
    if (pursuit_instance_generate(20, 60, 3, "cars", 0.0, 31337, 0, &inst) != PURSUIT_STATUS_OK)
        return 1;
    uint32_t m = 0, n = 0, s = 0;
    if (pursuit_instance_dims(inst, &m, &n, &s) != PURSUIT_STATUS_OK) return 2;
    if (m != 20 || n != 60 || s != 3) return 3;

    PursuitRecovery *rec = NULL;
    if (pursuit_recover(inst, "stp:mu=2.5", 0, 0, 0.0, &rec) != PURSUIT_STATUS_OK) return 4;
    if (!pursuit_recovery_converged(rec)) return 5;
    double err = 1.0;
    if (pursuit_recovery_relative_error(rec, inst, &err) != PURSUIT_STATUS_OK) return 6;
    if (!(err < 1e-10)) return 7;

    double rho = pursuit_theory_rho(1.0, 0.5340);
    if (fabs(rho - 1.0) > 2e-3) return 8;

    /* Error path: the message must be retrievable. */
    PursuitInstance *bad = NULL;
    if (pursuit_instance_generate(30, 20, 2, "gaussian", 0.0, 1, 0, &bad)
            != PURSUIT_STATUS_INVALID_ARGUMENT)
        return 9;
    char msg[256];
    if (pursuit_last_error(msg, sizeof msg) <= 1) return 10;

    pursuit_recovery_free(rec);
    pursuit_instance_free(inst);
    printf("c smoke ok: err=%.3e rho=%.4f msg=%s\n", err, rho, msg);
    return 0;
}
"#,
    )
    .unwrap();

    let exe = dir.path().join("smoke");
    let compile = Command::new("cc")
        .arg(&c_src)
        .arg("-I")
        .arg(&header_dir)
        .arg(staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("cc available");
    assert!(
        compile.status.success(),
        "compile failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );
    let run = Command::new(&exe).output().expect("smoke binary runs");
    assert!(
        run.status.success(),
        "smoke exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains("c smoke ok"), "{text}");
}
