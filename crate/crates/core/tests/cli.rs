use std::process::Command;

use tabular_imitation::harness::{render_report, run_sweep, ExperimentConfig};

const CONFIG: &str = "\
family = standard_imitation
S = 4
A = 3
H = 3
alg = bc, vail
sweep = expert_m
values = 4, 16
T = 50
seeds = 2
";

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn sweep_writes_the_library_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.cfg");
    let out = dir.path().join("out.csv");
    std::fs::write(&config, CONFIG).unwrap();
    let status = bench()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let expected = render_report(&run_sweep(&ExperimentConfig::parse(CONFIG).unwrap()).unwrap()).0;
    assert_eq!(std::fs::read_to_string(&out).unwrap(), expected);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.cfg");
    std::fs::write(&config, CONFIG).unwrap();
    let output = bench()
        .args(["sweep", "--alg", "bc", "--values", "8", "--seeds", "1", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let cells = text.split("\n\n").next().unwrap();
    assert_eq!(cells.lines().filter(|l| l.starts_with("standard_imitation,bc,expert_m,8,")).count(), 1);
    assert!(!text.contains(",vail,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let missing = bench().args(["sweep", "--config", "/nonexistent/sweep.cfg"]).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("reading"));

    let no_size = bench().args(["sweep", "--alg", "bc"]).output().unwrap();
    assert!(!no_size.status.success());

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "S = 3\nfrobnicate = 1\n").unwrap();
    let bad_key = bench().arg("sweep").arg("--config").arg(&config).output().unwrap();
    assert!(!bad_key.status.success());
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("line 2"));
}
