use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cislunar_sda::config::fixture;
use tempfile::TempDir;

fn sda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sda")).args(args).env_remove("SDA_SEED").output().expect("run sda")
}

fn ok(args: &[&str]) -> Output {
    let out = sda(args);
    assert!(out.status.success(), "sda {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fx(name: &str) -> String {
    fixture(name).to_str().unwrap().to_string()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn family_counts(dir: &Path) -> BTreeMap<String, usize> {
    let mut r = csv::Reader::from_path(dir.join("family_counts.csv")).unwrap();
    r.records()
        .map(|row| {
            let row = row.unwrap();
            (row[0].to_string(), row[1].parse().unwrap())
        })
        .collect()
}

/// Four optimization targets, one per broad family type, for quick GA runs.
fn small_targets(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(fixture("optimization_set.csv")).unwrap();
    let mut lines = text.lines();
    let mut out = vec![lines.next().unwrap().to_string()];
    out.extend(lines.filter(|l| ["7,", "16,", "28,", "34,"].iter().any(|p| l.starts_with(p))).map(String::from));
    let path = dir.join("targets4.csv");
    std::fs::write(&path, out.join("\n") + "\n").unwrap();
    path
}

fn tiny_config(dir: &Path) -> PathBuf {
    let targets = small_targets(dir);
    let text = format!(
        "[run]\nseed = 11\nn_observers = 2\nhorizon_tu = 2.0\nslots = \"{}\"\ntargets = \"{}\"\n\n\
         [ga]\npopulation = 10\nmax_generations = 8\nstall_generations = 4\n",
        fx("tiny_slots.csv"),
        p(&targets)
    );
    let path = dir.join("tiny.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn catalog_filter_reproduces_family_counts() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "--out",
        p(dir.path()),
        "catalog",
        "--catalog",
        &fx("validation_counts.csv"),
        "--si-max",
        "1.3",
        "--period-max",
        "6.28",
    ]);
    let expected: BTreeMap<String, usize> = [
        ("BNO", 11),
        ("BSO", 11),
        ("DRO", 668),
        ("L1NHO", 21),
        ("L1SHO", 21),
        ("L2NHO", 170),
        ("L2SHO", 170),
        ("LPEO", 447),
        ("LPWO", 924),
        ("R1:1O", 276),
        ("R2:1O", 696),
        ("R4:1O", 539),
        ("L1TT", 19),
    ]
    .into_iter()
    .map(|(f, n)| (f.to_string(), n))
    .collect();
    assert_eq!(family_counts(dir.path()), expected);
}

#[test]
fn one_slot_per_orbit_gives_one_slot_per_periodic_orbit() {
    let dir = TempDir::new().unwrap();
    ok(&["--out", p(dir.path()), "catalog", "--catalog", &fx("validation_pooled.csv"), "--slots-per-orbit", "1"]);
    let periodic: usize = family_counts(dir.path()).iter().filter(|(f, _)| *f != "L1TT").map(|(_, n)| n).sum();
    let slots = csv::Reader::from_path(dir.path().join("slots.csv")).unwrap().records().count();
    assert_eq!(slots, periodic);
    assert!(slots > 0);
}

#[test]
fn missing_catalog_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("no_such_catalog.csv");
    let out = sda(&["--out", p(dir.path()), "catalog", "--catalog", p(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_catalog.csv"));
}

fn rmse_pos(dir: &Path) -> f64 {
    let mut r = csv::Reader::from_path(dir.join("per_target.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let col = h.iter().position(|c| c == "rmse_pos_km").unwrap();
    r.records().next().unwrap().unwrap()[col].parse().unwrap()
}

#[test]
fn perfect_track_has_negligible_error() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "--out",
        p(dir.path()),
        "track",
        "--target-id",
        "lofi-baseline-best",
        "--sigma-angle",
        "0",
        "--init-error",
        "0",
    ]);
    assert!(rmse_pos(dir.path()) < 1e-3);
}

#[test]
fn track_is_byte_identical_for_a_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        ok(&[
            "--seed",
            "5",
            "--out",
            p(d.path()),
            "track",
            "--target-id",
            "lofi-stp-b-worst",
            "--constellation",
            &fx("constellations_lofi.csv"),
            "--group",
            "stp-b",
        ]);
    }
    for f in ["per_target.csv", "track_lofi-stp-b-worst.csv", "sigma_lofi-stp-b-worst.csv"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
}

#[test]
fn seed_precedence_is_flag_then_env_then_config() {
    let dir = TempDir::new().unwrap();
    let run = |seed_flag: Option<&str>, env: Option<&str>, out: &Path| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sda"));
        cmd.env_remove("SDA_SEED");
        if let Some(e) = env {
            cmd.env("SDA_SEED", e);
        }
        let mut args = vec!["--out".to_string(), p(out).to_string()];
        if let Some(s) = seed_flag {
            args.extend(["--seed".to_string(), s.to_string()]);
        }
        args.extend(["track", "--target-id", "lofi-baseline-best", "--horizon", "1"].map(String::from));
        assert!(cmd.args(&args).output().unwrap().status.success());
        read(out.join("per_target.csv"))
    };
    let flag = run(Some("9"), None, &dir.path().join("a"));
    let env = run(None, Some("9"), &dir.path().join("b"));
    let both = run(Some("9"), Some("4"), &dir.path().join("c"));
    let other = run(None, Some("4"), &dir.path().join("d"));
    assert_eq!(flag, env);
    assert_eq!(flag, both);
    assert_ne!(flag, other);
}

#[test]
fn optimize_matches_exhaustive_and_lists_slot_records() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    ok(&["--config", p(&cfg), "--out", p(&out), "optimize", "--exhaustive-check"]);
    let result: serde_json::Value = serde_json::from_slice(&read(out.join("result.json"))).unwrap();
    let ex = &result["exhaustive"];
    assert_eq!(ex["evaluations"], 66);
    assert!(ex["ga_relative_gap"].as_f64().unwrap() <= 0.05);
    let mut r = csv::Reader::from_path(out.join("best_constellation.csv")).unwrap();
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    for c in ["family", "period_tu", "x", "y", "z", "vx", "vy", "vz"] {
        assert!(headers.iter().any(|h| h == c), "{c}");
    }
    assert_eq!(r.records().count(), 2);
    assert!(out.join("checkpoints/gen_0000.json").exists());
}

#[test]
fn optimize_is_deterministic_and_resumable() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["--config", p(&cfg), "--out", p(&a), "optimize"]);
    ok(&["--config", p(&cfg), "--out", p(&b), "optimize"]);
    ok(&["--config", p(&cfg), "--out", p(&c), "optimize", "--resume", p(&a.join("checkpoints/gen_0002.json"))]);
    let files = ["result.json", "history.csv", "best_constellation.csv", "per_target.csv", "slots.csv"];
    for f in files {
        assert_eq!(read(a.join(f)), read(b.join(f)), "rerun {f}");
        assert_eq!(read(a.join(f)), read(c.join(f)), "resume {f}");
    }
    let last = std::fs::read_dir(a.join("checkpoints")).unwrap().count() - 1;
    let name = format!("checkpoints/gen_{last:04}.json");
    assert_eq!(read(a.join(&name)), read(c.join(&name)));
}

#[test]
fn resume_rejects_changed_inputs() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(dir.path());
    let a = dir.path().join("a");
    ok(&["--config", p(&cfg), "--out", p(&a), "optimize", "--max-generations", "1"]);
    let out = sda(&[
        "--config",
        p(&cfg),
        "--seed",
        "12",
        "--out",
        p(&dir.path().join("b")),
        "optimize",
        "--resume",
        p(&a.join("checkpoints/gen_0000.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_then_report_covers_all_families() {
    let dir = TempDir::new().unwrap();
    let v = dir.path().join("validation");
    ok(&[
        "--out",
        p(&v),
        "validate",
        "--constellation",
        &fx("constellations_lofi.csv"),
        "--group",
        "stp-b",
        "--subsample",
        "26",
        "--horizon",
        "1",
        "--no-dro-split",
    ]);
    let families = |dir: &Path| -> Vec<String> {
        let v: serde_json::Value = serde_json::from_slice(&read(dir.join("family_stats.json"))).unwrap();
        v.as_array().unwrap().iter().map(|e| e["family"].as_str().unwrap().to_string()).collect()
    };
    assert_eq!(families(&v).len(), 13);
    let plain = dir.path().join("plain");
    ok(&["--out", p(&plain), "report", "--results", p(&v)]);
    assert_eq!(families(&plain), families(&v));
    let split = dir.path().join("split");
    ok(&["--out", p(&split), "report", "--results", p(&v), "--dro-split", "3.75"]);
    let f = families(&split);
    assert_eq!(f.len(), 15);
    assert_eq!(f.iter().filter(|n| n.starts_with("DRO")).count(), 3);
    for file in ["histograms.csv", "visibility.csv"] {
        assert!(split.join(file).exists());
    }
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = TempDir::new().unwrap();
    let out = sda(&["report", "--results", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nbogus = 1\n").unwrap();
    assert_eq!(sda(&["--config", p(&bad), "--out", p(dir.path()), "catalog"]).status.code(), Some(2));
    assert_eq!(sda(&["--out", p(dir.path()), "track", "--sigma-dyn", "-1"]).status.code(), Some(2));
    assert_eq!(sda(&["--bogus-flag"]).status.code(), Some(2));
    let cfg = tiny_config(dir.path());
    let infeasible = sda(&["--config", p(&cfg), "--out", p(dir.path()), "optimize", "--n", "13"]);
    assert_eq!(infeasible.status.code(), Some(4));
    let singular = sda(&[
        "--out",
        p(dir.path()),
        "track",
        "--target-id",
        "lofi-stp-b-best",
        "--constellation",
        &fx("constellations_lofi.csv"),
        "--group",
        "stp-b",
        "--sigma-angle",
        "0",
        "--init-error",
        "0",
        "--sigma-dyn",
        "0",
    ]);
    assert_eq!(singular.status.code(), Some(3));
}
