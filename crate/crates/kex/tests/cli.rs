//! End-to-end runs of the `kex` binary on tiny configurations.

use std::path::{Path, PathBuf};
use std::process::Command;

use kex::formats::{parse_instance, parse_weights};

fn kex(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kex")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kex-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const TINY: &[&str] =
    &["--pair-rate", "6", "--ndad-rate", "1", "--periods", "5", "--reps", "2", "--C", "3", "--P", "3"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(TINY).chain(tail).copied().collect()
}

#[test]
fn flags_override_the_config_file() {
    let dir = scratch("precedence");
    let cfg = dir.join("exp.toml");
    std::fs::write(&cfg, "scheme = \"kpd\"\naltruist_penalty = -15.0\nseed = 4\nformat = \"both\"\n").unwrap();
    let out = dir.join("out");
    let o =
        kex(&with(&["simulate", "--config", cfg.to_str().unwrap()], &["--W", "-2", "--out", out.to_str().unwrap()]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read(&out.join("summary.csv"));
    let row = summary.lines().nth(1).unwrap();
    assert!(row.starts_with("KPD,-2.00,"), "{row}");
    let json: serde_json::Value = serde_json::from_str(&read(&out.join("report.json"))).unwrap();
    assert_eq!(json["base_seed"], 4);
    assert_eq!(json["max_cycle"], 3);
}

#[test]
fn simulate_is_reproducible() {
    let dir = scratch("repro");
    let run = |sub: &str| {
        let out = dir.join(sub);
        let o = kex(&with(&["simulate"], &["--seed", "11", "--out", out.to_str().unwrap()]));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        ["summary.csv", "queues.csv", "replications.csv"].map(|f| read(&out.join(f)))
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn learn_then_simulate_with_learned_weights() {
    let dir = scratch("learn");
    let weights = dir.join("w.txt");
    let o = kex(&with(
        &["learn", "--rule", "Lin(1)", "--iterations", "2"],
        &["--W", "-2", "--weights-file", weights.to_str().unwrap(), "--out", dir.to_str().unwrap()],
    ));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = parse_weights(&read(&weights)).unwrap();
    assert_eq!(table.ndad_penalty, -2.0);
    assert_eq!(table.pair_weight.iter().copied().fold(f64::INFINITY, f64::min), 1.0);

    let out = dir.join("sim");
    let o = kex(&with(
        &["simulate", "--scheme", "learned", "--weights-file", weights.to_str().unwrap()],
        &["--out", out.to_str().unwrap()],
    ));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&out.join("summary.csv")).lines().nth(1).unwrap().contains(",-2.00,"));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = scratch("sweep");
    let o = kex(&with(&["sweep", "--axis", "C", "--values", "2,3"], &["--out", dir.to_str().unwrap()]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read(&dir.join("cycle_caps.csv"));
    let caps: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(caps, ["2", "3"]);
    let bad = kex(&with(&["sweep", "--axis", "C", "--values", "3,2,4"], &["--out", dir.to_str().unwrap()]));
    assert!(!bad.status.success());
}

#[test]
fn fairness_scores_reference_queue_as_one() {
    let dir = scratch("fairness");
    let o = kex(&[
        "fairness",
        "--queue",
        "KPD=88.22,121.28,87.66,14.50,70.48",
        "--queue",
        "Myopic=47.78,72.14,89.24,55.42,118.42",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.join("fairness.csv"));
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[1], "KPD,0.00293,0.00274,0.00184,1.00,1.00,1.00");
    assert!(rows[2].starts_with("Myopic,0.00334,0.00300,0.00110,"));
}

#[test]
fn export_instance_parses_back() {
    let dir = scratch("export");
    let o = kex(&with(&["export-instance", "--period", "2"], &["--out", dir.to_str().unwrap()]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let inst = parse_instance(&read(&dir.join("instance_r0_p2.txt"))).unwrap();
    assert!(!inst.nodes.is_empty());
    assert!(inst.to_packing().is_ok());
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "pair_rat = 3.0\n").unwrap();
    let o = kex(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!o.stderr.is_empty());
    let o = kex(&["simulate", "--scheme", "learned", "--reps", "1"]);
    assert!(!o.status.success());
}
