//! End-to-end tests of the `ecaug` binary: file formats, outputs, exit
//! codes, and determinism under a fixed seed.

use std::path::Path;
use std::process::{Command, Output};

fn ecaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecaug"))
        .args(args)
        .env_remove("ECAUG_SEED")
        .output()
        .expect("binary runs")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, contents).expect("write");
    path.to_string_lossy().into_owned()
}

const BARBELL: &str = "# two triangles joined by a bridge\n6 7\n1 2 1\n1 3 1\n2 3 1\n4 5 1\n4 6 1\n5 6 1\n3 4 1\n";

#[test]
fn extreme_sets_text_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let out = ecaug(&["extreme-sets", "--input", &input, "--check-oracle"]);
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("{1,2,3} delta=1"));
    assert!(text.contains("{4,5,6} delta=1"));
    assert!(String::from_utf8(out.stderr).unwrap().contains("oracle check passed"));
}

#[test]
fn extreme_sets_json_shape() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let out = ecaug(&["extreme-sets", "--input", &input, "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let nodes = v["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 9); // root + 2 extreme sets + 6 leaves
    // the root has no parent and delta 0
    let root = nodes.iter().find(|n| n["parent"].is_null()).unwrap();
    assert_eq!(root["delta"], 0);
    assert_eq!(root["members"].as_array().unwrap().len(), 6);
}

#[test]
fn augment_barbell() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let out = ecaug(&["augment", "--input", &input, "--tau", "3", "--verify"]);
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("total 2"), "{text}");
    assert!(text.contains("pass"), "{text}");
    // tau = 1 on a connected graph: empty output, total 0
    let out = ecaug(&["augment", "--input", &input, "--tau", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "total 0\n");
}

#[test]
fn augment_infeasible_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let beta = write_file(
        dir.path(),
        "beta.txt",
        "1 0\n2 0\n3 0\n4 0\n5 0\n6 0\n",
    );
    let out = ecaug(&["augment", "--input", &input, "--tau", "2", "--beta", &beta]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn augment_json_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let args = ["augment", "--input", &input, "--tau", "3", "--seed", "11", "--json"];
    let a = ecaug(&args);
    let b = ecaug(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["total_weight"], 2);
}

#[test]
fn splitoff_path_and_odd_degree() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "path.txt", "3 2\n1 2 1\n2 3 1\n");
    let out = ecaug(&["splitoff", "--input", &input, "--vertex", "2", "--verify"]);
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("1 3 1\n"), "{text}");
    // odd degree: exit 1 with a message
    let odd = write_file(dir.path(), "odd.txt", "3 2\n1 2 1\n2 3 2\n");
    let out = ecaug(&["splitoff", "--input", &odd, "--vertex", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("odd"));
}

#[test]
fn cut_threshold_output_and_backends() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let out = ecaug(&["cut-threshold", "--input", &input, "--source", "1", "--phi", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "4 5 6\n");
    let empty = ecaug(&["cut-threshold", "--input", &input, "--source", "1", "--phi", "0"]);
    assert_eq!(String::from_utf8(empty.stdout).unwrap(), "\n");
    // backend equivalence
    let naive = ecaug(&["cut-threshold", "--input", &input, "--source", "2", "--phi", "2"]);
    let accel = ecaug(&[
        "cut-threshold",
        "--input",
        &input,
        "--source",
        "2",
        "--phi",
        "2",
        "--backend",
        "accelerated",
        "--seed",
        "7",
    ]);
    assert_eq!(naive.stdout, accel.stdout);
}

#[test]
fn bench_emits_json_records() {
    let out = ecaug(&["bench", "--random", "40", "90", "3", "--seed", "5", "--repeat", "3"]);
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 3);
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["n"], 40);
        assert!(v["flow_calls"].as_u64().unwrap() > 0);
        assert_eq!(v["total_weight"], v["expected_optimum"]);
    }
    // fixed seed: identical records
    let again = ecaug(&["bench", "--random", "40", "90", "3", "--seed", "5", "--repeat", "3"]);
    let strip_times = |s: &str| -> Vec<serde_json::Value> {
        s.trim()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("tree_ms");
                v.as_object_mut().unwrap().remove("augment_ms");
                v
            })
            .collect()
    };
    assert_eq!(strip_times(&text), strip_times(&String::from_utf8(again.stdout).unwrap()));
}

#[test]
fn malformed_input_is_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_file(dir.path(), "bad.txt", "2 1\n1 9 1\n");
    let out = ecaug(&["extreme-sets", "--input", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8(out.stderr).unwrap().is_empty());
    let missing = dir.path().join("nope.txt").to_string_lossy().into_owned();
    let out = ecaug(&["augment", "--input", &missing, "--tau", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_env_variable_is_default() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "b6.txt", BARBELL);
    let with_env = Command::new(env!("CARGO_BIN_EXE_ecaug"))
        .args(["augment", "--input", &input, "--tau", "3", "--json"])
        .env("ECAUG_SEED", "11")
        .output()
        .unwrap();
    let with_flag = ecaug(&["augment", "--input", &input, "--tau", "3", "--seed", "11", "--json"]);
    assert_eq!(with_env.stdout, with_flag.stdout);
}
