use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xagent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xagent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn record_and_run(map: &str, dir: &Path) -> i32 {
    let demo = dir.join("demo");
    let rec = xagent(&["record-demo", "--map", map, "--out", path_str(&demo)]);
    assert_eq!(code(&rec), 0, "{}", String::from_utf8_lossy(&rec.stderr));
    let run = xagent(&["run-mission", "--demo", path_str(&demo), "--out", path_str(&dir.join("run"))]);
    code(&run)
}

#[test]
fn bundled_missions_exit_with_their_outcome() {
    for (map, expected) in [("mission1", 0), ("mission2", 1), ("mission3", 0)] {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(record_and_run(map, dir.path()), expected, "{map}");
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap()).unwrap();
        let outcome = if expected == 0 { "success" } else { "fail" };
        assert_eq!(report["outcome"], outcome);
        assert_eq!(report["map_id"], map);
        let svg = fs::read_to_string(dir.path().join("run/trajectory.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    record_and_run("mission3", a.path());
    record_and_run("mission3", b.path());
    for file in ["demo/meta.jsonl", "demo/frame_00003.pgm", "run/report.json", "run/trajectory.svg"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn navigating_agent_and_baseline_run_from_cli() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    assert_eq!(code(&xagent(&["record-demo", "--map", "mission1", "--out", path_str(&demo)])), 0);
    let alg1 = xagent(&["run-mission", "--demo", path_str(&demo), "--alg", "1", "--out", path_str(&dir.path().join("a1"))]);
    assert_eq!(code(&alg1), 0);
    let report = fs::read_to_string(dir.path().join("a1/report.json")).unwrap();
    assert!(report.contains("\"algorithm\": \"navigate\""));
    let base = xagent(&["run-mission", "--demo", path_str(&demo), "--baseline", "--out", path_str(&dir.path().join("b"))]);
    assert_eq!(code(&base), 0);
    let report = fs::read_to_string(dir.path().join("b/report.json")).unwrap();
    assert!(report.contains("\"algorithm\": \"baseline\""));
}

#[test]
fn usage_and_io_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    assert_eq!(code(&xagent(&["record-demo", "--map", "/no/such/file.map", "--out", out])), 2);
    assert_eq!(code(&xagent(&["record-demo", "--out", out])), 2);
    assert_eq!(code(&xagent(&["run-mission", "--demo", "/no/such/demo"])), 2);
    assert_eq!(code(&xagent(&["run-mission", "--demo", out, "--alg", "3"])), 2);
    assert_eq!(code(&xagent(&["record-demo", "--map", "mission1", "--step", "-1", "--out", out])), 2);
    assert_eq!(code(&xagent(&["frobnicate"])), 2);
}

#[test]
fn config_file_wins_over_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "map = \"mission1\"\nstride = 6\n").unwrap();
    let demo = dir.path().join("demo");
    let rec = xagent(&[
        "record-demo", "--config", path_str(&cfg), "--map", "mission2", "--stride", "2", "--out", path_str(&demo),
    ]);
    assert_eq!(code(&rec), 0);
    let meta = fs::read_to_string(demo.join("meta.jsonl")).unwrap();
    assert!(meta.contains("\"stride\":6"));
    assert!(meta.contains("\"map_id\":\"mission1\""));

    fs::write(&cfg, "strid = 6\n").unwrap();
    let bad = xagent(&["record-demo", "--config", path_str(&cfg), "--map", "mission1", "--out", path_str(&demo)]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn empty_scaling_list_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let run = xagent(&["scaling", "--sizes", "--out", path_str(dir.path())]);
    assert_eq!(code(&run), 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("scaling.csv")).unwrap(),
        "l,side,agent_interactions,baseline_interactions,ratio\n"
    );
}

#[test]
fn scaling_rows_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let run = xagent(&["scaling", "--sizes", "3,5", "--out", path_str(dir.path())]);
    assert_eq!(code(&run), 0);
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("3,"));
    assert!(rows[1].starts_with("5,"));
}

#[test]
fn causal_writes_report_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let run = xagent(&["causal", "--out", path_str(dir.path())]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("causal_report.json")).unwrap()).unwrap();
    assert!(report["rms_ratio"].as_f64().unwrap() < 0.5);
    for f in ["source_1.csv", "source_2.csv", "target.csv", "naive.csv"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.starts_with("t,u,y\n"), "{f}");
    }
}

#[test]
fn cyclic_description_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let desc = dir.path().join("cyclic.txt");
    fs::write(&desc, "mech a <- b : unknown\nmech b <- a : unknown\n").unwrap();
    let run = xagent(&["causal", "--description", path_str(&desc), "--out", path_str(dir.path())]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stderr).contains("cycl"));
}
