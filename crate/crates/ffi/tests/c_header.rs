//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler is available.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "avtable.h"

int main(void) {
    AvProjection p;
    if (av_project("equality", 0.3, 0.7, 1, 1, &p) != AV_STATUS_OK) return 1;
    if (fabs(p.theta_a - 0.5) > 1e-15 || p.member) return 2;

    AvEProcess *ep = NULL;
    if (av_eprocess_new("equality", 1, 1, NULL, &ep) != AV_STATUS_OK) return 3;
    const uint8_t a[1] = {0}, b[1] = {1};
    for (int i = 0; i < 10; i++) {
        if (av_eprocess_update(ep, a, 1, b, 1, NULL) != AV_STATUS_OK) return 4;
    }
    AvDecision d;
    if (av_eprocess_decision(ep, 0.05, &d) != AV_STATUS_OK || d != AV_DECISION_REJECT) return 5;
    char *snap = NULL;
    if (av_eprocess_snapshot(ep, &snap) != AV_STATUS_OK) return 6;
    av_string_free(snap);
    av_eprocess_free(ep);

    if (av_eprocess_new("line:5:1", 1, 1, NULL, &ep) != AV_STATUS_INVALID_ARGUMENT) return 7;
    if (av_last_error() == NULL) return 8;

    AvConfSeq *cs = NULL;
    if (av_confseq_new(AV_EFFECT_LOG_ODDS_RATIO, 0.05, 1, 1, NULL, NULL, &cs) != AV_STATUS_OK) return 9;
    AvInterval iv;
    av_confseq_interval(cs, &iv);
    if (iv.n_alive != 241 || iv.empty) return 10;
    av_confseq_free(cs);
    printf("ok %s\n", av_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&compiler).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler '{compiler}'");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // The test binary lives in target/<profile>/deps; the static library one level up.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libavtable_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let bin = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&compiler)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "C program failed: {:?}", out);
    assert_eq!(String::from_utf8_lossy(&out.stdout), format!("ok {}\n", env!("CARGO_PKG_VERSION")));
}
