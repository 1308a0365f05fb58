use std::path::Path;
use std::process::{Command, Output};

use bundleflow::cli_io::read_trace;

fn bundleflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bundleflow"))
        .args(args)
        .current_dir(dir)
        .env("BUNDLEFLOW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const FLOW: &str = r#"{
  "command": "flow-ode",
  "geometry": "berger",
  "runs": [{"lambda1": 1, "lambda2": 2}, {"lambda1": 2, "lambda2": 1}],
  "numerics": {"t_end": 0.3}
}"#;

#[test]
fn flow_then_plot_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "flow.json", FLOW);
    write(dir.path(), "plot.json", r#"{"command": "plot", "outputs": {"inputs": ["."], "plot": "fig.svg"}}"#);

    let mut first = Vec::new();
    for round in 0..2 {
        let out = bundleflow(&["flow-ode", "--config", "flow.json"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = bundleflow(&["plot", "--config", "plot.json"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let files: Vec<Vec<u8>> = ["berger_1_2.csv", "berger_2_1.csv", "fig.svg"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect();
        if round == 0 {
            first = files;
        } else {
            assert_eq!(first, files);
        }
    }
    let trace = read_trace(&dir.path().join("berger_1_2.csv")).unwrap();
    assert_eq!(trace.meta("label"), Some("berger(1,2)"));
    assert!(trace.len() > 2);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "flow.json", FLOW);
    write(dir.path(), "bad.json", r#"{"command": "flow-ode", "geometry": "berger", "params": {"lambda3": 1}}"#);

    let mismatch = bundleflow(&["verify", "--config", "flow.json"], dir.path());
    assert_eq!(mismatch.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&mismatch.stderr).unwrap();
    assert_eq!(err["error"], "config");

    assert_eq!(bundleflow(&["flow-ode", "--config", "bad.json"], dir.path()).status.code(), Some(2));
    assert_eq!(bundleflow(&["flow-ode", "--config", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(bundleflow(&["flow-ode"], dir.path()).status.code(), Some(2));
}

#[test]
fn single_check_from_command_line() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "verify.json", r#"{"command": "verify"}"#);
    let out = bundleflow(&["verify", "--config", "verify.json", "--check", "implicit-constants"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("PASS implicit-constants"), "{stdout}");
    let unknown = bundleflow(&["verify", "--config", "verify.json", "--check", "nope"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
}
