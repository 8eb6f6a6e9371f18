use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn avalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_avalab"))
        .args(args)
        .env_remove("AVALAB_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn run_prints_seed_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let o = avalab(&["run", "--seed", "4", "--horizon", "3", "--out-dir", out_dir]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("seed 4\n"), "{text}");
    assert!(text.contains("integrity"));
    for f in ["run.jsonl", "summary.csv", "verdicts.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let r = avalab(&["replay", dir.path().join("run.jsonl").to_str().unwrap()]);
    assert!(r.status.success(), "{}", stderr(&r));
    let verdict_lines = |s: &str| s.lines().filter(|l| l.starts_with("  ")).map(str::to_owned).collect::<Vec<_>>();
    assert!(stdout(&r).starts_with("seed 4\n"));
    assert_eq!(verdict_lines(&stdout(&r)), verdict_lines(&text));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_avalab"))
        .args(["run", "--horizon", "2"])
        .env("AVALAB_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("run.jsonl").exists());
}

#[test]
fn bad_config_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[params]\nalpha = 5\n").unwrap();
    let o = avalab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("params.alpha"), "{}", stderr(&o));

    let o = avalab(&["run", "--config", "/nonexistent/avalab.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let o = avalab(&["run", "--gamma", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("adversary.gamma"), "{}", stderr(&o));
}

#[test]
fn truncated_trace_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    assert!(avalab(&["run", "--horizon", "2", "--out-dir", out_dir]).status.success());
    let path = dir.path().join("run.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: Vec<&str> = text.lines().collect();
    std::fs::write(&path, cut[..cut.len() - 1].join("\n")).unwrap();
    let o = avalab(&["replay", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
}

#[test]
fn sweep_is_deterministic() {
    let args = ["sweep", "--beta1", "6", "--gamma", "0,0.2,0.4", "--runs", "2000", "--seed", "5"];
    let a = avalab(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&avalab(&args)));
    let lines: Vec<String> = stdout(&a).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("gamma,beta1,formula_composed"));
    assert!(lines[1].starts_with("0,6,6,inf,6,6,"));

    let o = avalab(&["sweep", "--gamma", "1.0", "--runs", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn attack_demo_reports_the_victim() {
    let o = avalab(&["attack-demo", "--config", scenario("delay-attack.toml").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("victim did not deliver the target"), "{text}");
    assert!(text.contains("agreement"));

    let o = avalab(&["attack-demo", "--config", scenario("honest.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
