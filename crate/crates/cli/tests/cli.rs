//! End-to-end tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bsmn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsmn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bsmn-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const BIASED_MEASURE: &str = "atom t 7/20\natom T 3/20\natom b 1/4\natom B 1/4\n";
const UNIFORM_MEASURE: &str = "atom t 1/4\natom T 1/4\natom b 1/4\natom B 1/4\n";
const LOOP_GRAPH: &str = "mn-graph 2 3\nv 0 inf\ne 0 0\nroot 0\n";
const UNIT_CORE_22: &str = "mn-graph 2 2\nv 0 1\nroot 0\n";

#[test]
fn reduce_prints_identity_for_trivial_word() {
    let out = bsmn(&["reduce", "--m", "2", "--n", "3", "--word", "tbbTBBB"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "identity");
}

#[test]
fn reduce_prints_normal_form() {
    let out = bsmn(&["reduce", "--m", "2", "--n", "3", "--word", "tb^5"]);
    assert_eq!(stdout(&out).trim(), "b^6tb");
}

#[test]
fn phenotype_prints_label() {
    let out = bsmn(&["phenotype", "--m", "2", "--n", "3", "--N", "12"]);
    assert_eq!(stdout(&out).trim(), "1");
    let out = bsmn(&["phenotype", "--m", "2", "--n", "3", "--N", "inf"]);
    assert_eq!(stdout(&out).trim(), "inf");
}

#[test]
fn nonmixing_rejects_unbiased_measure_with_exit_two() {
    let dir = temp_dir("bias");
    let measure = write_file(&dir, "uniform.measure", UNIFORM_MEASURE);
    let out = bsmn(&[
        "nonmixing",
        "--m",
        "4",
        "--n",
        "2",
        "--p",
        "2",
        "--start-label",
        "8",
        "--measure",
        measure.to_str().unwrap(),
        "--trials",
        "10",
        "--horizon",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("BadParams: bias required"), "{stderr}");
}

#[test]
fn validate_graph_reports() {
    let dir = temp_dir("validate");
    let graph = write_file(&dir, "loop.graph", LOOP_GRAPH);
    let out = bsmn(&["validate-graph", "--graph", graph.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("valid: true"));
    assert!(text.contains("saturated: false"));
    assert!(text.contains("connected: true"));
}

#[test]
fn escape_reports_are_byte_identical_across_runs() {
    let dir = temp_dir("escape");
    let graph = write_file(&dir, "loop.graph", LOOP_GRAPH);
    let measure = write_file(&dir, "uniform.measure", UNIFORM_MEASURE);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out_dir = dir.join(format!("run{run}"));
        let out = bsmn(&[
            "escape",
            "--m",
            "2",
            "--n",
            "3",
            "--graph",
            graph.to_str().unwrap(),
            "--measure",
            measure.to_str().unwrap(),
            "--trials",
            "50",
            "--horizon",
            "60",
            "--seed",
            "5",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read(out_dir.join("escape.csv")).unwrap();
        let json = std::fs::read(out_dir.join("escape.json")).unwrap();
        outputs.push((csv, json));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_file_overrides_flags() {
    let dir = temp_dir("config");
    let graph = write_file(&dir, "loop.graph", LOOP_GRAPH);
    let config = write_file(
        &dir,
        "escape.cfg",
        "seed 9\ntrials 40\nhorizon 30\natom t 1/4\natom T 1/4\natom b 1/4\natom B 1/4\n",
    );
    let out = bsmn(&[
        "escape",
        "--m",
        "2",
        "--n",
        "3",
        "--graph",
        graph.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "1234",
        "--trials",
        "7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = stdout(&out);
    assert!(json.contains("\"seed\": 9"), "config seed should win: {json}");
    assert!(json.contains("\"trials\": 40"));
}

#[test]
fn walk_dumps_trace_csv_with_valuation() {
    let dir = temp_dir("walk");
    let measure = write_file(&dir, "biased.measure", BIASED_MEASURE);
    let out = bsmn(&[
        "walk",
        "--m",
        "4",
        "--n",
        "2",
        "--measure",
        measure.to_str().unwrap(),
        "--k",
        "12",
        "--seed",
        "3",
        "--p",
        "2",
        "--start-label",
        "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    assert!(csv.contains("step,increment,height,valuation"));
    assert!(csv.lines().count() >= 14); // config comment + header + 13 rows
    let first_row = csv.lines().nth(2).unwrap();
    assert!(first_row.starts_with("0,,0,3"), "{first_row}");
}

#[test]
fn paste_round_trips_through_files() {
    let dir = temp_dir("paste");
    // Realize the unit core as a preaction file by writing it directly.
    let pre = write_file(
        &dir,
        "unit.pre",
        "mn-graph 2 2\nv 0 1\nroot 0\norbit 0 1\nbasepoint 0 0\n",
    );
    let out_path = dir.join("pasted.pre");
    let out = bsmn(&[
        "paste",
        "--m",
        "2",
        "--n",
        "2",
        "--pre1",
        pre.to_str().unwrap(),
        "--pre2",
        pre.to_str().unwrap(),
        "--s1",
        "tt",
        "--s2",
        "t^6",
        "--s3",
        "tt",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("cond1=true cond2=true cond3=true"));
    let pasted = std::fs::read_to_string(out_path).unwrap();
    assert!(pasted.contains("mn-graph 2 2"));
    assert!(pasted.contains("tau"));

    // A middle word too short for the bridge is rejected cleanly.
    let out = bsmn(&[
        "paste",
        "--m",
        "2",
        "--n",
        "2",
        "--pre1",
        pre.to_str().unwrap(),
        "--pre2",
        pre.to_str().unwrap(),
        "--s1",
        "tt",
        "--s2",
        "tt",
        "--s3",
        "tt",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let _ = UNIT_CORE_22;
}

#[test]
fn mixing_witness_cli_runs() {
    let dir = temp_dir("mixing");
    let core = write_file(&dir, "unit.graph", UNIT_CORE_22);
    let measure = write_file(&dir, "uniform.measure", UNIFORM_MEASURE);
    let out_dir = dir.join("report");
    let out = bsmn(&[
        "mixing-witness",
        "--m",
        "2",
        "--n",
        "2",
        "--core1",
        core.to_str().unwrap(),
        "--core2",
        core.to_str().unwrap(),
        "--measure",
        measure.to_str().unwrap(),
        "--k-list",
        "20,120",
        "--trials",
        "25",
        "--seed",
        "11",
        "--epsilon",
        "0.2",
        "--calibration-trials",
        "25",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("mixing-witness.csv")).unwrap();
    assert!(csv.contains("k,trials,hypotheses_passed,successes,success_rate"));
    assert_eq!(csv.lines().count(), 4); // comment + header + two k rows
}
