use std::fs;
use std::process::{Command, Output};

fn etacrit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etacrit"))
        .args(args)
        .env_remove("ETACRIT_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|rest| rest.trim().to_string()))
        .unwrap_or_else(|| panic!("no '{key}' in\n{text}"))
}

fn number(text: &str, key: &str) -> f64 {
    field(text, key).split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn list_shows_builtin_dimensions() {
    let o = etacrit(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("CHSH: n_A = 2, n_B = 2"));
    assert!(text.contains("I3322: n_A = 3, n_B = 3"));
    assert!(text.contains("A5: n_A = 4, n_B = 4"));
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(etacrit(&["--help"]).status.code(), Some(0));
    assert_eq!(etacrit(&["etacrit", "--help"]).status.code(), Some(0));
    assert_eq!(etacrit(&["etacrit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(etacrit(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(etacrit(&["etacrit", "--starts", "0"]).status.code(), Some(1));
    assert_eq!(etacrit(&["etacrit", "--p", "1.5"]).status.code(), Some(1));
}

#[test]
fn missing_settings_file_is_an_input_error() {
    let o = etacrit(&["eval", "--state-file", "/nonexistent/settings.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/settings.txt"));
}

#[test]
fn eval_at_the_tsirelson_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tsirelson.txt");
    fs::write(
        &path,
        "theta 0.7853981633974483\nA 0 0 0\nA 1 0.7853981633974483 0\nB 0 1.1780972450961724 0\nB 1 1.9634954084936207 0\n",
    )
    .unwrap();
    let o = etacrit(&["eval", "--settings-file", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let eta = number(&text, "eta_crit");
    assert!((eta - 0.8284271247).abs() < 1e-9);
    let one = etacrit(&["eval", "--settings-file", path.to_str().unwrap(), "--detector", "one-sided"]);
    let eta = number(&stdout(&one), "eta_crit");
    assert!((eta - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
}

#[test]
fn search_output_evaluates_back_to_the_same_threshold() {
    let args = ["etacrit", "--ineq", "chsh", "--p", "0.05", "--starts", "6", "--seed", "3", "--jobs", "1"];
    let o = etacrit(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let reported = number(&text, "eta_crit");
    let settings: String = text
        .lines()
        .skip_while(|l| !l.starts_with("# best settings"))
        .collect::<Vec<_>>()
        .join("\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.txt");
    fs::write(&path, settings).unwrap();
    let e = etacrit(&["eval", "--settings-file", path.to_str().unwrap()]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let recomputed = number(&stdout(&e), "eta_crit");
    assert!((reported - recomputed).abs() < 1e-9, "{reported} vs {recomputed}");
}

#[test]
fn runs_are_deterministic_across_thread_counts() {
    let base = ["etacrit", "--ineq", "i3322", "--detector", "one-sided", "--noise", "colored-ap", "--p", "0.1", "--starts", "6", "--seed", "5"];
    let one = etacrit(&[&base[..], &["--jobs", "1"]].concat());
    let three = etacrit(&[&base[..], &["--jobs", "3"]].concat());
    assert!(one.status.success());
    assert_eq!(stdout(&one), stdout(&three));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# small run\nstarts = 4\nseed = 8\np = 0.1\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = etacrit(&["--config", cfg, "etacrit", "--jobs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(field(&text, "starts"), "4 (seed 8)");
    assert!(field(&text, "noise").contains("p = 0.1"));
    let echoed = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(echoed.contains("starts = 4"), "{echoed}");

    let o = etacrit(&["--config", cfg, "etacrit", "--jobs", "1", "--seed", "9"]);
    assert_eq!(field(&stdout(&o), "starts"), "4 (seed 9)");
}

#[test]
fn scan_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = etacrit(&[
        "scan", "--mode", "p-sweep", "--ineq", "chsh", "--p-grid", "0,0.1", "--starts", "4", "--jobs", "1",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("mode,inequality,detector,noise_kind,p,w,cs,theta,eta_crit,no_violation"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn check_suite_passes() {
    let o = etacrit(&["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
