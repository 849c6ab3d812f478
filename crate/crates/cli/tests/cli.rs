use std::path::Path;
use std::process::{Command, Output};

fn wifio(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wifio"))
        .current_dir(dir)
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = wifio(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, name: &str, seed: &str, hours: &str) {
    ok(
        dir,
        &["synth", "--seed", seed, "--hours", hours, "--out", name],
    );
}

#[test]
fn staged_run_matches_one_shot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "a.scans", "1", "2");
    synth(d, "b.scans", "2", "1");
    ok(
        d,
        &[
            "pipeline",
            "--train",
            "a.scans",
            "--test",
            "b.scans",
            "--model-out",
            "one.model",
            "--predictions",
            "one.jsonl",
        ],
    );

    ok(d, &["cluster", "a.scans", "--out", "a.clusters"]);
    ok(
        d,
        &[
            "features",
            "a.scans",
            "--assignment",
            "a.clusters",
            "--out",
            "a.csv",
        ],
    );
    ok(d, &["train", "a.csv", "--out", "staged.model"]);
    ok(d, &["cluster", "b.scans", "--out", "b.clusters"]);
    ok(
        d,
        &[
            "predict",
            "b.scans",
            "--model",
            "staged.model",
            "--assignment",
            "b.clusters",
            "--out",
            "staged.jsonl",
        ],
    );

    let read = |f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read("one.model"), read("staged.model"));
    assert_eq!(read("one.jsonl"), read("staged.jsonl"));

    let report: serde_json::Value =
        serde_json::from_str(&ok(d, &["eval", "staged.jsonl", "--scans", "b.scans"])).unwrap();
    assert!(report["auc"].as_f64().unwrap() > 0.85);
    let latency: serde_json::Value =
        serde_json::from_str(&ok(d, &["latency", "staged.jsonl", "--scans", "b.scans"])).unwrap();
    assert!(!latency["switches"].as_array().unwrap().is_empty());
}

#[test]
fn synth_then_pipeline_reaches_the_target_auc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("world.cfg"), "seed = 1\nduration_s = 28800\n").unwrap();
    std::fs::write(d.join("other.cfg"), "seed = 2\nduration_s = 28800\n").unwrap();
    ok(d, &["synth", "--spec", "world.cfg", "--out", "a.scans"]);
    ok(d, &["synth", "--spec", "other.cfg", "--out", "b.scans"]);
    let report: serde_json::Value = serde_json::from_str(&ok(
        d,
        &["pipeline", "--train", "a.scans", "--test", "b.scans"],
    ))
    .unwrap();
    let auc = report["report"]["auc"].as_f64().unwrap();
    assert!(auc >= 0.85, "{auc}");
    assert_eq!(report["test"]["fingerprints"], 9600);
}

#[test]
fn auxiliary_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "a.scans", "3", "3");
    ok(
        d,
        &[
            "synth",
            "--seed",
            "4",
            "--hours",
            "0.1",
            "--out",
            "short.scans",
        ],
    );

    let summary: serde_json::Value = serde_json::from_str(&ok(d, &["ingest", "a.scans"])).unwrap();
    assert_eq!(summary[0]["fingerprints"], 3600);

    let edges = ok(d, &["graph", "a.scans", "--nodes", "nodes.txt"]);
    assert!(edges.lines().all(|l| l.split(' ').count() == 2));
    let nodes = std::fs::read_to_string(d.join("nodes.txt")).unwrap();
    assert!(nodes.starts_with("id weight size\n"));

    let cv: serde_json::Value =
        serde_json::from_str(&ok(d, &["--learner", "rf", "xval", "a.scans"])).unwrap();
    assert!(cv["folds"].as_array().unwrap().len() >= 2);

    let dims: serde_json::Value =
        serde_json::from_str(&ok(d, &["select-dims", "a.scans", "--max-d", "6"])).unwrap();
    assert_eq!(dims["entries"].as_array().unwrap().len(), 28);

    ok(
        d,
        &[
            "pipeline",
            "--train",
            "a.scans",
            "--test",
            "short.scans",
            "--model-out",
            "m.model",
        ],
    );
    let csv = ok(
        d,
        &[
            "warmup",
            "short.scans",
            "--model",
            "m.model",
            "--minutes",
            "20",
        ],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "minute,accuracy");
    assert_eq!(lines.len(), 7);
}

#[test]
fn bad_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "a.scans", "5", "0.2");
    for args in [
        vec!["cluster", "a.scans", "--no-such-flag"],
        vec!["--eps", "2", "cluster", "a.scans"],
        vec!["--learner", "svm", "cluster", "a.scans"],
        vec!["cluster", "missing.scans"],
        vec!["frobnicate"],
    ] {
        let out = wifio(d, &args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
