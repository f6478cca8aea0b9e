//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration test binaries live in target/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let lib = lib_dir.join("liblbps_ctmc_ffi.a");
    if !lib.exists() {
        eprintln!("static library not built at {}, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "lbps_ctmc.h"
int main(void) {
    double wu[3] = {0.0, 0.1, -0.1};
    double wb[3] = {0.2, 0.0, -0.2};
    LbpsRateMatrix *m = NULL;
    if (lbps_rate_matrix_new(3, LBPS_FEATURES_CHAIN, wu, 3, wb, 3, &m) != LBPS_STATUS_OK) return 1;
    double pi[3];
    if (lbps_rate_matrix_pi(m, pi, 3) != LBPS_STATUS_OK) return 2;
    lbps_rate_matrix_free(m);
    double t;
    if (lbps_bounce_time_normal(0.0, 2.0, 1.0, &t) != LBPS_STATUS_OK) return 3;
    if (lbps_bounce_time_normal(0.0, 2.0, -1.0, &t) != LBPS_STATUS_INVALID_ARGUMENT) return 4;
    if (lbps_last_error_message() == NULL) return 5;
    printf("%.6f %.6f\n", pi[0] + pi[1] + pi[2], t);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.000000 1.000000");
}
