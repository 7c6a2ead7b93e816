use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qcbn::datagen::structure1;

fn qcbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcbn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct Files {
    dir: tempfile::TempDir,
}

impl Files {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = structure1();
        fs::write(dir.path().join("net.json"), f.network_json).unwrap();
        fs::write(dir.path().join("cons.json"), f.constraints_json).unwrap();
        Files { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn sample(&self, name: &str, count: usize, seed: u64) {
        let o = qcbn(&[
            "sample",
            &self.s("net.json"),
            "--count",
            &count.to_string(),
            "--hidden",
            "CognitiveLoad",
            "--seed",
            &seed.to_string(),
            "--out",
            &self.s(name),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}

const TWO_NODE: &str = r#"{
  "nodes": [
    {"name": "A", "states": ["lo", "hi"], "parents": []},
    {"name": "B", "states": ["lo", "hi"], "parents": ["A"]}
  ],
  "cpts": {
    "A": [[0.5, 0.5]],
    "B": [[0.3, 0.7], [0.6, 0.4]]
  }
}"#;

#[test]
fn validate_exit_codes() {
    let files = Files::new();
    let o = qcbn(&["validate", &files.s("net.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "valid: 7 variables\n");

    fs::write(files.path("bad.json"), TWO_NODE.replace("[0.3, 0.7]", "[0.3, 0.8]")).unwrap();
    let o = qcbn(&["validate", &files.s("bad.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("defect: "));

    fs::write(files.path("broken.json"), "{ not json").unwrap();
    assert_eq!(qcbn(&["validate", &files.s("broken.json")]).status.code(), Some(2));
    assert_eq!(qcbn(&["validate", &files.s("missing.json")]).status.code(), Some(2));
}

#[test]
fn sample_writes_visible_columns_deterministically() {
    let files = Files::new();
    files.sample("a.csv", 5, 3);
    files.sample("b.csv", 5, 3);
    let a = fs::read(files.path("a.csv")).unwrap();
    assert_eq!(a, fs::read(files.path("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(!lines[0].split(',').any(|c| c == "CognitiveLoad"));
    assert_eq!(lines[0].split(',').count(), 6);
}

#[test]
fn constrained_learning_requires_constraints() {
    let files = Files::new();
    files.sample("train.csv", 20, 1);
    let o = qcbn(&[
        "learn",
        &files.s("net.json"),
        &files.s("train.csv"),
        "--algorithm",
        "em-qc",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = qcbn(&[
        "learn",
        &files.s("net.json"),
        &files.s("train.csv"),
        "--algorithm",
        "bogus",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(qcbn(&["learn", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(qcbn(&["--help"]).status.code(), Some(0));
}

#[test]
fn learn_writes_curve_and_network() {
    let files = Files::new();
    files.sample("train.csv", 100, 1);
    files.sample("test.csv", 100, 2);
    let o = qcbn(&[
        "learn",
        &files.s("net.json"),
        &files.s("train.csv"),
        "--algorithm",
        "em-qc",
        "--constraints",
        &files.s("cons.json"),
        "--test-data",
        &files.s("test.csv"),
        "--iterations",
        "5",
        "--curve-out",
        &files.s("curve.csv"),
        "--out",
        &files.s("learned.json"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("iteration 5 "));
    let curve = fs::read_to_string(files.path("curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "iteration,train_nll_per_case,test_nll_per_case,violation");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..]
        .iter()
        .all(|l| l.split(',').count() == 4 && !l.contains(",,")));
    let v = qcbn(&["validate", &files.s("learned.json")]);
    assert!(v.status.success());
}

#[test]
fn violations_lists_each_violated_inequality() {
    let files = Files::new();
    let o = qcbn(&["violations", &files.s("net.json"), &files.s("cons.json")]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("total 0\ninequalities 51\n"));

    fs::write(files.path("two.json"), TWO_NODE).unwrap();
    fs::write(
        files.path("two_cons.json"),
        r#"{"influences": [{"parent": "A", "child": "B", "sign": "+"}]}"#,
    )
    .unwrap();
    let o = qcbn(&["violations", &files.s("two.json"), &files.s("two_cons.json")]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    let total: f64 = lines[0].strip_prefix("total ").unwrap().parse().unwrap();
    assert!((total - 0.3).abs() < 1e-12, "{text}");
    assert_eq!(lines[1], "inequalities 1");
    assert_eq!(lines[3], "violated 1");
    assert!(lines[4].contains("child=B parent=A sign=+"), "{}", lines[4]);
}

#[test]
fn eval_prints_scores() {
    let files = Files::new();
    files.sample("test.csv", 50, 4);
    let o = qcbn(&[
        "eval",
        &files.s("net.json"),
        &files.s("test.csv"),
        "--target",
        "ErrorInPrimaryTask",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cases 50");
    assert!(lines[1].starts_with("avg_neg_log_likelihood "));
    assert!(lines[2].starts_with("avg_quadratic_loss ") && lines[2].ends_with("target=ErrorInPrimaryTask"));
}

fn write_experiment(dir: &Path, out: &str) -> PathBuf {
    let path = dir.join(format!("{out}.json"));
    let cfg = format!(
        r#"{{"fixture": "structure1", "train_count": 60, "test_count": 80, "replications": 2,
            "algorithms": ["em", "em-qc"], "iterations": 4, "seed": 7, "output_dir": "{out}"}}"#
    );
    fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn experiment_smoke() {
    let files = Files::new();
    let cfg = write_experiment(files.dir.path(), "run");
    let o = qcbn(&["experiment", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(files.path("run/summary.csv")).unwrap();
    assert_eq!(stdout(&o), summary);
    assert_eq!(summary.lines().count(), 1 + 1 + 4);
    assert!(summary.lines().nth(1).unwrap().starts_with("baseline,"));
    for name in ["em_rep00.csv", "em_rep01.csv", "em-qc_rep00.csv", "em-qc_rep01.csv"] {
        assert!(files.path("run/curves").join(name).exists(), "{name}");
    }
    assert!(files.path("run/train.csv").exists() && files.path("run/test.csv").exists());

    fs::write(
        files.path("bad.json"),
        r#"{"fixture": "structure1", "train_count": 1, "test_count": 1, "typo": 3}"#,
    )
    .unwrap();
    assert_eq!(qcbn(&["experiment", &files.s("bad.json")]).status.code(), Some(2));
}
