//! End-to-end tests against the compiled binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENARIO: &str = "\
# desk-scale star: three elements hanging off the manager host
[nodes]
0 gnm
1 element
2 element
3 element

[links]
0 1 1
0 2 1
0 3 1

[run]
strategy = all
rounds = 5
seed = 42
";

fn write_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("desk.scn");
    fs::write(&path, SCENARIO).unwrap();
    path
}

fn nmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmsim")).args(args).output().expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn writes_the_full_report_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let out_dir = tmp.path().join("out");

    let output = nmsim(&[scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    assert_eq!(
        read_dir_sorted(&out_dir),
        vec![
            "comparison.txt",
            "cost_breakdown.csv",
            "ledger.csv",
            "report_cs.csv",
            "report_cs.md",
            "report_flatbed.csv",
            "report_flatbed.md",
            "report_hybrid.csv",
            "report_hybrid.md",
        ]
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("rounds: 5"), "{stdout}");
    assert!(stdout.contains("mean latency"), "{stdout}");
}

#[test]
fn same_seed_gives_byte_identical_bundles() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for dir in &dirs {
        let output = nmsim(&[scenario.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(output.status.success());
    }
    for name in read_dir_sorted(&dirs[0]) {
        let a = fs::read(dirs[0].join(&name)).unwrap();
        let b = fs::read(dirs[1].join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn rounds_override_shrinks_the_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let out_dir = tmp.path().join("out");
    let output = nmsim(&[
        scenario.to_str().unwrap(),
        "--rounds",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(output.status.success());

    let names = read_dir_sorted(&out_dir);
    assert!(names.iter().all(|n| !n.ends_with(".md")), "{names:?}");
    let csv = fs::read_to_string(out_dir.join("report_cs.csv")).unwrap();
    // header + one data row + average row
    assert_eq!(csv.lines().count(), 3, "{csv}");
}

#[test]
fn seed_override_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let out_dir = tmp.path().join("out");
    let output =
        nmsim(&[scenario.to_str().unwrap(), "--seed", "7", "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success());
}

#[test]
fn compare_switch_reports_a_pass_on_a_consistent_run() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = write_scenario(tmp.path());
    let out_dir = tmp.path().join("out");
    let output =
        nmsim(&[scenario.to_str().unwrap(), "--compare", "--out", out_dir.to_str().unwrap()]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("result: PASS"), "{stdout}");
    let txt = fs::read_to_string(out_dir.join("comparison.txt")).unwrap();
    assert!(txt.contains("result: PASS"), "{txt}");
}

#[test]
fn invalid_scenarios_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.scn");
    fs::write(&path, SCENARIO.replace("seed = 42", "")).unwrap();
    let output = nmsim(&[path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn shipped_scenarios_run_and_compare_clean() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut ran = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("scn") {
            continue;
        }
        let tmp = tempfile::tempdir().unwrap();
        let output = nmsim(&[
            path.to_str().unwrap(),
            "--compare",
            "--out",
            tmp.path().join("out").to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "{}: {}{}",
            path.display(),
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
        ran += 1;
    }
    assert!(ran >= 4, "expected the sample scenarios, found {ran}");
}

#[test]
fn missing_files_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let output = nmsim(&[
        tmp.path().join("absent.scn").to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}
