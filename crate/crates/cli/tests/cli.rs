use std::process::Command;

fn mhdtc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mhdtc"))
}

#[test]
fn steady_check_passes_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        mhdtc().args(["steady-check", "--preset", "paper-default", "--output.dir"]).arg(dir.path()).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.lines().any(|l| l.starts_with("[PASS] steady residual")), "{stdout}");
    let run = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["passed"], true);
    assert_eq!(manifest["command"], "steady-check");
    assert!(run.join("steady.csv").exists());
}

#[test]
fn failing_checks_give_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    // A diffusivity this large has no growing mode.
    let out = mhdtc()
        .args(["spectrum", "--physics.eps=5", "--resolution.nr=16", "--resolution.mmax=2", "--resolution.kmax=2"])
        .args(["--output.cache", "false", "--output.dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL] growing leader"));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, r#"{"physics": {"nu": -1}}"#).unwrap();
    let out = mhdtc().args(["steady-check", "--config"]).arg(&file).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("physics.nu"));

    let out = mhdtc().args(["steady-check", "--physics.colour", "red"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn print_config_echoes_overrides() {
    let out = mhdtc().args(["scaling", "--print-config", "--physics.eps", "2e-3"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["physics"]["eps"], 2e-3);
    assert_eq!(v["resolution"]["nr"], 96);
}
