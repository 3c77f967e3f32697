//! Compiles a C client against the generated header and the static library.

use std::path::PathBuf;
use std::process::Command;

/// The static library next to the test binary (`target/<profile>/deps`) or
/// one level up, where `cargo build` places it.
fn static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libskillchain_ffi.a"))
        .find(|p| p.exists())
        .expect("libskillchain_ffi.a next to the test binary")
}

#[test]
fn c_client_builds_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = static_lib();
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_client");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c_client.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "client exited with {:?}", run.status.code());
    let v: f64 = String::from_utf8(run.stdout).unwrap().trim().parse().unwrap();
    assert!((v - 0.5628).abs() < 1e-4, "optimal start value {v}");
}
