use std::fs;
use std::path::PathBuf;

use assert_cmd::Command;

fn pendavg() -> Command {
    Command::cargo_bin("pendavg").unwrap()
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn stdout(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn freqs_golden() {
    assert_eq!(stdout(pendavg().arg("freqs")), golden("freqs.csv"));
}

#[test]
fn orbit_goldens() {
    assert_eq!(
        stdout(pendavg().args(["orbit", "--mode", "mode1", "--alpha", "1,0", "--samples", "4"])),
        golden("orbit_mode1_4.csv")
    );
    assert_eq!(
        stdout(pendavg().args(["orbit", "--mode", "mode2", "--alpha", "0,0", "--samples", "3"])),
        golden("orbit_mode2_origin.csv")
    );
    assert_eq!(stdout(pendavg().args(["orbit", "--alpha", "1,0", "--samples", "1"])), golden("orbit_single.csv"));
}

#[test]
fn presets_are_pinned() {
    for name in ["corollary1", "corollary2"] {
        let report = json(&stdout(pendavg().args(["verify", "--preset", name, "--eps", ""])));
        let mut spec = report["spec"].clone();
        spec.as_object_mut().unwrap().remove("period");
        assert_eq!(spec, json(&golden(&format!("preset_{name}.json"))), "{name}");
    }
}

#[test]
fn zero_perturbation_is_degenerate() {
    assert_eq!(stdout(pendavg().arg("zeros")), golden("zeros_zero_perturbation.json"));
    let grid = stdout(pendavg().args(["average", "--grid", "-2,2,3"]));
    let rows: Vec<&str> = grid.lines().collect();
    assert_eq!(rows[0], "a1,a2,g1,g2");
    assert_eq!(rows.len(), 10);
    for row in &rows[1..] {
        assert!(row.ends_with(",0.0000000000000000e0,0.0000000000000000e0"), "{row}");
    }
}

#[test]
fn corollary1_zeros_and_classes() {
    let report = json(&stdout(pendavg().args(["zeros", "--preset", "corollary1"])));
    let zeros = report["zeros"].as_array().unwrap();
    assert_eq!(zeros.len(), 4);
    assert_eq!(report["orbit_classes"], 2);
    assert!(zeros.iter().all(|z| z["simple"] == true));
}

#[test]
fn corollary2_point_is_a_zero() {
    let csv = stdout(pendavg().args(["average", "--preset", "corollary2", "--point", "0,-27.313708498984759"]));
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[2].abs() < 1e-9 && row[3].abs() < 1e-9, "{row:?}");
}

#[test]
fn verify_writes_reports_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(pendavg().args(["corollary2", "--eps", "1e-3", "--samples", "5", "--out"]).arg(dir.path()));
    let report = json(&out);
    let orbits = report["orbits"].as_array().unwrap();
    assert_eq!(orbits.len(), 1);
    let o = &orbits[0];
    assert!(o["residual"].as_f64().unwrap() <= 1e-9);
    assert!(o["distance_to_prediction"].as_f64().unwrap() <= 1e-2);
    let csv = fs::read_to_string(dir.path().join(o["trajectory"].as_str().unwrap())).unwrap();
    assert!(csv.starts_with("tau,th1,th1d,th2,th2d\n"));
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(fs::read_to_string(dir.path().join("verify.json")).unwrap(), out);
}

#[test]
fn corollary1_verifies_one_orbit_per_class() {
    let report = json(&stdout(pendavg().args(["corollary1", "--eps", "1e-3"])));
    let orbits = report["orbits"].as_array().unwrap();
    assert_eq!(orbits.len(), 2);
    assert!(orbits.iter().all(|o| o.get("error").is_none()));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.json");
    fs::write(&path, r#"{"preset": "corollary1", "r2": 2.0, "epsilons": []}"#).unwrap();
    let report = json(&stdout(pendavg().arg("zeros").arg("--config").arg(&path)));
    // Only the (0, +-Y) pair lies inside radius 2.
    assert_eq!(report["zeros"].as_array().unwrap().len(), 2);
    let report = json(&stdout(pendavg().arg("zeros").arg("--config").arg(&path).args(["--r2", "50"])));
    assert_eq!(report["zeros"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    pendavg().args(["zeros", "--f1", "th1 +"]).assert().code(2);
    pendavg().args(["zeros", "--p", "2", "--q", "4"]).assert().code(2);
    pendavg().args(["zeros", "--r1", "0"]).assert().code(2);
    pendavg().args(["zeros", "--preset", "nope"]).assert().code(2);
    pendavg().args(["zeros", "--config", "/nonexistent/exp.json"]).assert().code(2);
    pendavg().args(["orbit", "--mode", "mode7"]).assert().code(2);
    // Evaluation failures are numerical, not configuration, errors.
    pendavg()
        .args(["average", "--f2", "1 / (th1 - th1)", "--point", "1,0"])
        .assert()
        .code(3);
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let a = stdout(pendavg().args(["--jobs", "1", "zeros", "--preset", "corollary2"]));
    let b = stdout(pendavg().args(["--jobs", "4", "zeros", "--preset", "corollary2"]));
    assert_eq!(a, b);
}

#[test]
fn parse_config_fuzz_seeds() {
    use pendavg_cli::config::{ConfigLayer, Experiment};
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/parse_config");
    let mut resolved = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let layer = ConfigLayer::from_json(&text).unwrap();
        if Experiment::resolve(&[layer]).is_ok() {
            resolved += 1;
        }
    }
    assert!(resolved >= 3);
}
