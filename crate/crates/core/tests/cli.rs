use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nodaldtn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nodaldtn"))
        .args(args)
        .env("NODALDTN_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn exact_circle_verifies() {
    let out = nodaldtn(&["verify", "--exact", "circle", "--k", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["passed"], true);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("PASS defect_equals_morse"));
}

#[test]
fn circle_reports_zero_defect_and_double_eigenvalue() {
    let out = nodaldtn(&["circle", "--k", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = stdout_json(&out);
    assert_eq!(r["defect"], 0);
    assert_eq!(r["multiplicity"], 2);
    assert_eq!(r["kernel_dim"], 1);
}

#[test]
fn even_circle_needs_the_flag() {
    assert_eq!(nodaldtn(&["circle", "--k", "4"]).status.code(), Some(2));
    assert_eq!(nodaldtn(&["circle", "--k", "4", "--even"]).status.code(), Some(0));
}

#[test]
fn unequal_interval_is_not_chi_nodal() {
    let out = nodaldtn(&["interval", "--points", "1.0,2.5", "--length", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["is_chi_nodal"], false);
}

#[test]
fn malformed_partition_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"dim\": 2, \"subdomains\": [").unwrap();
    let bad = bad.to_str().unwrap();
    assert_eq!(nodaldtn(&["cuts", bad]).status.code(), Some(2));
    assert_eq!(nodaldtn(&["verify", "--shape", "rect:1,1", "--h", "0.1", "--partition", bad]).status.code(), Some(2));
}

#[test]
fn conflicting_partition_sources_are_rejected() {
    let out = nodaldtn(&["analyze", "--shape", "rect:1,1", "--h", "0.1", "--eig", "2", "--equipartition", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cuts_of_a_triangle_graph() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("tri.json");
    let text = serde_json::json!({
        "dim": 2,
        "subdomains": [{"id": 0}, {"id": 1}, {"id": 2}],
        "segments": [
            {"id": 0, "left": 0, "right": 1},
            {"id": 1, "left": 1, "right": 2},
            {"id": 2, "left": 0, "right": 2}
        ]
    });
    fs::write(&doc, text.to_string()).unwrap();
    let out = nodaldtn(&["cuts", doc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_eq!(r["bipartite"], false);
    assert_eq!(r["minimal_cut"]["members"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_square_writes_report_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = nodaldtn(&["verify", "--shape", "rect:1,1", "--h", "0.1", "--eig", "4", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "nodaldtn.report/1");
    assert_eq!(report["k"], 4);
    assert_eq!(report["defect"], 0);
    assert!(header(&dir.path().join("branches.csv")).starts_with("sigma,g1,"));
    assert_eq!(header(&dir.path().join("dtn_spectrum.csv")), "index,eigenvalue");
    assert_eq!(header(&dir.path().join("partition.csv")), "segment,left,right,x0,y0,x1,y1");
    let spectrum: Vec<f64> = fs::read_to_string(dir.path().join("dtn_spectrum.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!spectrum.is_empty());
    assert!(spectrum.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn interval_dtn_spectrum_is_just_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = nodaldtn(&["dtn", "--shape", "interval:3", "--h", "0.05", "--equipartition", "3", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("dtn_spectrum.csv")).unwrap(), "index,eigenvalue\n");
    assert_eq!(stdout_json(&out)["dtn"]["dim_s"], 0);
}

#[test]
fn flow_counts_one_crossing_for_a_deficient_partition() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = nodaldtn(&["flow", "--shape", "rect:3.141592653589793,2.221441469079183", "--h", "0.2618", "--align", "6", "--eig", "3", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert_eq!(r["crossings"], 1);
    assert_eq!(r["morse"], 1);
    assert!(header(&dir.path().join("branches.csv")).starts_with("sigma,g1,"));
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "--shape", "rect:1,1", "--h", "0.1", "--eig", "2"];
    let a = nodaldtn(&args);
    let b = nodaldtn(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn mode_picks_a_separable_function_in_a_degenerate_eigenspace() {
    let out = nodaldtn(&["analyze", "--shape", "rect:1,1", "--h", "0.1", "--eig", "2", "--mode", "2,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = stdout_json(&out);
    assert!(r["eigen"]["selection"].as_str().unwrap().contains("(2, 1)"));
    assert_eq!(r["report"]["k"], 2);
    assert_eq!(nodaldtn(&["analyze", "--shape", "rect:1,1", "--h", "0.1", "--eig", "2", "--mode", "2"]).status.code(), Some(2));
}
