use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "nanohydra.h"
int main(void) {
    NhModel *m = NULL;
    NhStatus s = nh_model_load_bytes((const uint8_t *)"x", 1, &m);
    int has_msg = nh_last_error_message() != NULL;
    double avg = 0.0;
    nh_avg_power_uw(1.0, 1.0, 0.0, 0.5, 1.0, &avg);
    nh_model_free(m);
    return (s == NH_STATUS_FORMAT && has_msg && nh_last_error_message() == NULL && avg == 1.0) ? 0 : 1;
}
"#;

#[test]
fn header_declares_the_exports() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nanohydra.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        }
    }
    assert!(header.contains("typedef struct NhModel NhModel;"));
}

/// Compiles and runs a C program against the static library when a C
/// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libnanohydra_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("t.c");
    let bin = dir.path().join("t");
    std::fs::write(&c, PROGRAM).unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&c)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Command::new(&bin).status().unwrap().success());
}
