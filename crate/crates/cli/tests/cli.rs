use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const QUICK: &str = "\
road_length_m = 1000.0
duration_ms = 1600
warmup_ms = 1000
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sidelink"));
    c.env_remove("SIDELINK_OUT_DIR");
    c
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn single_point_single_seed_writes_run_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("out");
    let o = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--seeds", "7", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        listing(&out),
        ["alpha=1_pkeep=0_policy=standard_seed=7.csv", "summary.csv"]
    );
    let run = std::fs::read_to_string(out.join("alpha=1_pkeep=0_policy=standard_seed=7.csv")).unwrap();
    assert!(run.starts_with("distance_m,variant,packets,prr,"));
    assert_eq!(run.lines().count(), 1 + 2 * 6);
}

#[test]
fn two_alphas_ten_seeds_and_deterministic_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let sweep = |out: &Path| {
        let o = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--alpha", "1,0.4", "--seed-count", "10"])
            .env("SIDELINK_OUT_DIR", out)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    sweep(&a);
    sweep(&b);

    let files = listing(&a);
    assert_eq!(files.len(), 21);
    assert_eq!(files.iter().filter(|f| f.starts_with("alpha=")).count(), 20);

    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 6);
    for dx in ["50", "100", "150", "200", "250", "300"] {
        let per_dx = rows.iter().filter(|r| r.split(',').nth(3) == Some(dx)).count();
        assert_eq!(per_dx, 2, "distance {dx}");
    }
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("10")));

    assert_eq!(files, listing(&b));
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn json_run_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QUICK);
    let out = dir.path().join("r.json");
    let o = bin()
        .args(["run", "--format", "json", "--seed", "3", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = sidelink_core::SimulationReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.seed, 3);
    assert_eq!(report.config.duration_ms, 1600);
}

#[test]
fn validate_echo_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "alpha = 0.6\np_keep = 0.2\n");
    let o = bin().args(["validate", "--echo"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 0);
    let echoed = String::from_utf8(o.stdout).unwrap();
    assert!(echoed.contains("alpha = 0.6"));
    let again = write_config(dir.path(), &echoed);
    let o2 = bin().args(["validate", "--echo"]).arg(&again).output().unwrap();
    assert_eq!(String::from_utf8(o2.stdout).unwrap(), echoed);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let o = bin().args(["sweep", "--bogus"]).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().output().unwrap();
    assert_eq!(code(&o), 2);

    let bad = write_config(dir.path(), "alpha = 1.5\n");
    let o = bin().args(["validate"]).arg(&bad).output().unwrap();
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let typo = write_config(dir.path(), "alhpa = 0.4\n");
    let o = bin().args(["validate"]).arg(&typo).output().unwrap();
    assert_eq!(code(&o), 3);

    let o = bin().args(["validate"]).arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(code(&o), 3);

    let o = bin().args(["run", "--desk-scale", "--alpha", "0"]).output().unwrap();
    assert_eq!(code(&o), 3);

    let trace = write_config(
        dir.path(),
        "scenario = \"trace\"\ntrace_path = \"nope.csv\"\nduration_ms = 1600\n",
    );
    let o = bin().args(["run", "--config"]).arg(&trace).output().unwrap();
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
