use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bcr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn grid_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = bcr(&["grid", "--seed", "7", "--set", "stages=4"], out);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let text = fs::read_to_string(a.join("grid.txt")).unwrap();
    assert!(!text.is_empty());
    assert_eq!(text, fs::read_to_string(b.join("grid.txt")).unwrap());
}

#[test]
fn inventory_experiment_writes_gap_table() {
    let dir = tempfile::tempdir().unwrap();
    let res = bcr(
        &[
            "inventory-experiment",
            "--set",
            "replications=2",
            "--set",
            "checkpoints=[1, 3]",
            "--set",
            "variants=[\"bcr_var_exp\"]",
            "--set",
            "theta_grid=[]",
        ],
        dir.path(),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(dir.path().join("inventory_gap.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("variant,t,replication,sup_gap"));
    assert_eq!(lines.count(), 4);
    assert!(!dir.path().join("inventory_perf.csv").exists());
}

#[test]
fn bet_experiment_without_timing_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bet.toml");
    fs::write(
        &config,
        "n_history = [5]\nreplications = 4\nmodels = [\"bcr_exp_exp\", \"standard\", \"dist_robust\"]\nhist_levels = []\ntiming = false\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = bcr(&["bet-experiment", "--config", config.to_str().unwrap(), "--seed", "3"], out);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let summary = fs::read(a.join("betting_summary.csv")).unwrap();
    assert_eq!(summary, fs::read(b.join("betting_summary.csv")).unwrap());
    let text = String::from_utf8(summary).unwrap();
    assert!(text.starts_with("model,N,mean,variance,cpu_seconds\n"));
    assert!(text.contains("dist_robust,5,0,0,0"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bcr(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(bcr(&["grid-error", "--set", "runs=0"], dir.path()).status.code(), Some(3));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "stages = = 3\n").unwrap();
    let res = bcr(&["grid", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line"));
}
