use std::path::PathBuf;
use std::process::Command;

/// Compiles `smoke.c` against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let Ok(cc) = which_cc() else {
        eprintln!("skipping: no C compiler");
        return;
    };
    // `cargo test` builds only the rlib, so build the static library here.
    let target = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ffi-smoke");
    let built = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "--release", "-p", "measerr-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .status()
        .unwrap();
    assert!(built.success());
    let lib = target.join("release/libmeaserr_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());

    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("slope "));
}

fn which_cc() -> Result<String, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(str::to_string)
        .ok_or(())
}
