use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn acvsim(args: &[&str], seed: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_acvsim"));
    c.args(args).env_remove("ACVSIM_SEED");
    if let Some(s) = seed {
        c.env("ACVSIM_SEED", s);
    }
    c.output().unwrap()
}

fn preset(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn scenario(dir: &Path, body: &str) -> String {
    let p = dir.join("s.json");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SHORT: &str = r#"{ "name": "short", "duration_s": 3, "seed": 5,
  "leader": { "kind": "constant", "speed_kmh": 72 },
  "attack": [ { "sensor": "l3", "start_s": 0, "offset_mps": 2 } ] }"#;

#[test]
fn every_preset_validates() {
    for name in [
        "fig3",
        "fig5",
        "fig6",
        "residual-stats",
        "fig7",
        "fig9",
        "fig10",
    ] {
        let o = acvsim(&["validate", &preset(name)], None);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn missing_file_exits_one_with_path() {
    let o = acvsim(&["validate", "/no/such/scenario.json"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/scenario.json"));
}

#[test]
fn invalid_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(
        dir.path(),
        r#"{ "name": "x", "duration_s": 1, "seed": 0,
        "leader": { "kind": "constant", "speed_mps": 20, "speed_kmh": 72 } }"#,
    );
    let o = acvsim(&["validate", &f], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("leader.speed"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["bogus"][..],
        &["validate"],
        &["validate", "x.json", "--nope"],
        &["reproduce", "fig4"],
        &[],
    ] {
        let o = acvsim(args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(
            String::from_utf8_lossy(&o.stderr).contains("Usage"),
            "{args:?}"
        );
    }
}

#[test]
fn simulate_writes_trace_summary_and_bandit_files() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), SHORT);
    let out = dir.path().join("out");
    let o = acvsim(&["simulate", &f, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let trace = std::fs::read_to_string(out.join("short.csv")).unwrap();
    assert_eq!(trace.lines().count(), 31);
    let mab = std::fs::read_to_string(out.join("short_mab.csv")).unwrap();
    assert_eq!(
        mab.lines().next().unwrap(),
        "t,arm_bitmask,D,xi,xi_star,cum_regret,bound"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("short.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
}

fn run_bytes(seed: Option<&str>) -> (serde_json::Value, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), SHORT);
    let out: PathBuf = dir.path().join("out");
    let o = acvsim(&["simulate", &f, "--out", out.to_str().unwrap()], seed);
    assert_eq!(o.status.code(), Some(0));
    let summary = serde_json::from_slice(&std::fs::read(out.join("short.json")).unwrap()).unwrap();
    (summary, std::fs::read(out.join("short.csv")).unwrap())
}

#[test]
fn seed_env_overrides_and_output_is_stable() {
    let (a, ta) = run_bytes(None);
    let (_, tb) = run_bytes(None);
    assert_eq!(ta, tb);
    let (c, tc) = run_bytes(Some("77"));
    assert_eq!(a["seed"], 5);
    assert_eq!(c["seed"], 77);
    assert_ne!(ta, tc);
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), SHORT);
    assert_eq!(
        acvsim(&["validate", &f], Some("seven")).status.code(),
        Some(1)
    );
}

#[test]
fn attack_search_reports_json() {
    let o = acvsim(
        &[
            "attack-search",
            &preset("fig9"),
            "--min-stealth",
            "0.9",
            "--restarts",
            "4",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let probs = v["stealth_probs"].as_array().unwrap();
    assert!(probs.iter().all(|p| p.as_f64().unwrap() >= 0.9 - 1e-6));
    let bad = acvsim(
        &["attack-search", &preset("fig9"), "--min-stealth", "1.5"],
        None,
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn mab_eval_writes_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let f = scenario(dir.path(), SHORT);
    let out = dir.path().join("out");
    let o = acvsim(
        &[
            "mab-eval",
            &f,
            "--runs",
            "2",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let freq = std::fs::read_to_string(out.join("short_arm_frequency.csv")).unwrap();
    assert_eq!(freq.lines().next().unwrap(), "arm_bitmask,plays,frequency");
    let e: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("short_mab_eval.json")).unwrap()).unwrap();
    assert_eq!(e["runs"], 2);
}

#[test]
fn reproduce_fig9_prefers_the_clean_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = acvsim(
        &["reproduce", "fig9", "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let freq = std::fs::read_to_string(dir.path().join("fig9_arm_frequency.csv")).unwrap();
    let top = freq.lines().nth(1).unwrap();
    assert!(top.starts_with("1011,"), "{top}");
}
