use serde_json::Value;
use wifio_web::{compare_scans_json, simulate_world_json, train_and_score_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn compare_swapped_pair() {
    let a = "0a:00:00:00:00:01 -40\n0a:00:00:00:00:02 -50\n0a:00:00:00:00:03 -60\n0a:00:00:00:00:04 -70\n";
    let b = "0a:00:00:00:00:01 -50\n0a:00:00:00:00:02 -40\n0a:00:00:00:00:03 -60\n0a:00:00:00:00:04 -70\n";
    let v = parse(compare_scans_json(a, b, true).unwrap());
    assert_eq!(v["case"], "spearman");
    assert!((v["distance"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    let aps = v["aps"].as_array().unwrap();
    assert_eq!(aps.len(), 4);
    assert_eq!(aps[0]["rank_a"], 1.0);
    assert_eq!(aps[0]["rank_b"], 2.0);
}

#[test]
fn compare_empty_scans_depends_on_adjacency() {
    let adj = parse(compare_scans_json("", "# nothing heard\n", true).unwrap());
    assert_eq!(
        (adj["case"].as_str(), adj["distance"].as_f64()),
        (Some("empty_adjacent"), Some(0.0))
    );
    let far = parse(compare_scans_json("", "", false).unwrap());
    assert_eq!(far["distance"], 2.0);
    let disjoint =
        parse(compare_scans_json("0a:00:00:00:00:01 -40", "0a:00:00:00:00:02 -40", true).unwrap());
    assert_eq!(disjoint["case"], "disjoint");
    assert_eq!(disjoint["aps"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_rejects_malformed_lines() {
    assert!(compare_scans_json("0a:00:00:00:00:01", "", true)
        .unwrap_err()
        .contains("line 1"));
    assert!(compare_scans_json("", "0a:00:00:00:00:01 loud", true).is_err());
    assert!(compare_scans_json("not-a-mac -40", "", true).is_err());
}

#[test]
fn world_timeline_covers_every_scan() {
    let v = parse(simulate_world_json("duration_s = 3600\n", 4, 0.22).unwrap());
    let timeline = v["timeline"].as_array().unwrap();
    assert_eq!(timeline.len(), 1200);
    assert_eq!(v["fingerprints"], 1200);
    let clusters = v["clusters"].as_u64().unwrap() as usize;
    assert!(timeline
        .iter()
        .all(|s| (s["cluster"].as_u64().unwrap() as usize) < clusters));
    assert!(v["largest_cluster"].as_u64().unwrap() >= 1);
    assert!(simulate_world_json("duration_s = 3600\n", 4, 2.0).is_err());
    assert!(simulate_world_json("duration_s = 100000\n", 4, 0.22).is_err());
    assert!(simulate_world_json("no_such_key = 1\n", 4, 0.22).is_err());
}

#[test]
fn graph_beats_chance_on_a_fresh_world() {
    let v = parse(train_and_score_json("duration_s = 14400\n", 1, 2, "gbm").unwrap());
    assert!(v["graph_auc"].as_f64().unwrap() > 0.85);
    assert!(v["fingerprint_auc"].as_f64().is_some());
    assert_eq!(v["timeline"].as_array().unwrap().len(), 4800);
    assert!(train_and_score_json("duration_s = 600\n", 1, 2, "svm").is_err());
}
