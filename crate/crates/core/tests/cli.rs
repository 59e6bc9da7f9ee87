use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowtomo"))
}

#[test]
fn lists_every_scenario() {
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["verify-gentle", "orbound", "shadow", "money-demo", "hlw"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.conf");
    let bad = dir.path().join("bad.conf");
    std::fs::write(&good, "scenario = gap\ntrials = 3\n").unwrap();
    std::fs::write(&bad, "scenario = gap\nwidth = 3\n").unwrap();
    assert!(bin().arg("validate-config").arg(&good).status().unwrap().success());
    let out = bin().arg("validate-config").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));
}

#[test]
fn run_writes_files_and_honours_seed_env() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("g.conf");
    std::fs::write(&conf, "scenario = verify-gentle\ntrials = 4\nseed = 1\n").unwrap();
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["run", "--config"]).arg(&conf).arg("--out-dir").arg(dir.path().join(out));
        cmd.args(["--set", "trials=3", "--workers", "2"]);
        match seed {
            Some(s) => cmd.env("SHADOWTOMO_SEED", s),
            None => cmd.env_remove("SHADOWTOMO_SEED"),
        };
        let status = cmd.status().unwrap();
        assert!(status.success());
        std::fs::read_to_string(dir.path().join(out).join("verify-gentle.csv")).unwrap()
    };
    let a = run("a", None);
    let b = run("b", Some("77"));
    assert_eq!(a.lines().count(), 4);
    assert!(a.lines().nth(1).unwrap().starts_with("verify-gentle,0,1,"));
    assert!(b.lines().nth(1).unwrap().starts_with("verify-gentle,0,77,"));
}

#[test]
fn exit_status_reflects_pass_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("o.conf");
    std::fs::write(&conf, "scenario = orbound\ntrials = 2\nbudget = 5\n").unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&conf)
        .arg("--out-dir")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}
