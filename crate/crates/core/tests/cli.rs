use std::process::Command;

fn pglab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pglab"))
}

#[test]
fn presets_lists_and_prints() {
    let out = pglab().arg("presets").output().unwrap();
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    assert_eq!(names.lines().count(), 12);
    assert!(names.lines().any(|l| l == "cartpole-srvrpg"));

    let out = pglab().args(["presets", "cartpole-srvrpg"]).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("algo = srvr-pg"));

    let out = pglab().args(["presets", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "env = cartpole\nalgo = gpomdp\nsigma = 10\nN = 5\nbudget = 20\nhorizon = 20\nn_seeds = 2\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = pglab()
        .args(["run", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["raw.csv", "aggregate.csv", "runs.csv"] {
        assert!(out_dir.join(f).exists());
    }
}

#[test]
fn bad_config_exits_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    std::fs::write(&cfg, "N = 0\n").unwrap();
    let out = pglab().args(["run", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn quick_verify_passes() {
    let out = pglab().args(["verify", "--quick"]).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 8);
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL")));
}
