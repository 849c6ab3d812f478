//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain strings and returns a JSON document, so the page
//! needs no generated type glue. The `*_json` functions hold the logic and are
//! callable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wifio_core::model::{ApId, Reading};
use wifio_core::pipeline::{build_structure, run_pipeline, FeatureMode};
use wifio_core::synth::{generate, WorldSpec};
use wifio_core::{
    distance, ingest, pairwise_ranking, DistanceCase, LearnerKind, PipelineConfig, ScanRecord,
};

/// Longest world the page may request, in seconds.
pub const MAX_DURATION_S: f64 = 12.0 * 3600.0;

#[derive(Serialize)]
struct ApRow {
    bssid: String,
    dbm_a: Option<i32>,
    dbm_b: Option<i32>,
    rank_a: Option<f64>,
    rank_b: Option<f64>,
}

#[derive(Serialize)]
struct Comparison {
    distance: f64,
    case: DistanceCase,
    aps: Vec<ApRow>,
}

fn parse_scan(text: &str, seq: u64) -> Result<ScanRecord, String> {
    let mut readings = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(ap), Some(dbm), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected `<bssid> <dBm>`", n + 1));
        };
        let bssid = ApId::parse(ap).map_err(|e| format!("line {}: {e}", n + 1))?;
        let rssi_dbm = dbm
            .parse()
            .map_err(|_| format!("line {}: bad dBm {dbm:?}", n + 1))?;
        readings.push(Reading { bssid, rssi_dbm });
    }
    Ok(ScanRecord {
        device_id: "page".into(),
        seq,
        timestamp_ms: seq as i64 * 3000,
        label: None,
        location: None,
        readings,
    })
}

/// Distance between two scans given as `<bssid> <dBm>` lines, with the
/// per-AP ranks behind it.
pub fn compare_scans_json(a: &str, b: &str, adjacent: bool) -> Result<String, String> {
    let records = [parse_scan(a, 0)?, parse_scan(b, 1)?];
    let m = ingest(&records).map_err(|e| e.to_string())?;
    let (x, y) = (m.fingerprint(0), m.fingerprint(1));
    let d = distance(x, y, 0, if adjacent { 1 } else { 2 });
    let mut aps = Vec::new();
    if d.case == DistanceCase::Spearman {
        let r = pairwise_ranking(x, y).map_err(|e| e.to_string())?;
        for (k, ap) in r.union_aps.iter().enumerate() {
            let dbm = |i: usize| {
                records[i]
                    .readings
                    .iter()
                    .find(|x| x.bssid == *m.ap_id(*ap))
                    .map(|x| x.rssi_dbm)
            };
            aps.push(ApRow {
                bssid: m.ap_id(*ap).as_str().to_string(),
                dbm_a: dbm(0),
                dbm_b: dbm(1),
                rank_a: Some(r.ranks_x[k]),
                rank_b: Some(r.ranks_y[k]),
            });
        }
    } else {
        for ap in m.ap_universe() {
            let dbm = |i: usize| {
                records[i]
                    .readings
                    .iter()
                    .find(|x| x.bssid == *ap)
                    .map(|x| x.rssi_dbm)
            };
            aps.push(ApRow {
                bssid: ap.as_str().to_string(),
                dbm_a: dbm(0),
                dbm_b: dbm(1),
                rank_a: None,
                rank_b: None,
            });
        }
    }
    serde_json::to_string(&Comparison {
        distance: d.value,
        case: d.case,
        aps,
    })
    .map_err(|e| e.to_string())
}

fn world(spec_text: &str, seed: u64) -> Result<Vec<ScanRecord>, String> {
    let mut spec = WorldSpec::from_text(spec_text).map_err(|e| e.to_string())?;
    spec.seed = seed;
    if spec.duration_s > MAX_DURATION_S {
        return Err(format!(
            "duration_s is capped at {MAX_DURATION_S} in the browser"
        ));
    }
    generate(&spec).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Step {
    t_s: f64,
    indoor: bool,
    cluster: usize,
    aps: usize,
}

#[derive(Serialize)]
struct WorldSummary {
    fingerprints: usize,
    aps: usize,
    clusters: usize,
    edges: usize,
    mean_cluster_size: f64,
    largest_cluster: usize,
    timeline: Vec<Step>,
}

/// Generates a synthetic day from `key = value` spec text, clusters it at
/// `eps` and returns the per-scan timeline.
pub fn simulate_world_json(spec_text: &str, seed: u64, eps: f64) -> Result<String, String> {
    let records = world(spec_text, seed)?;
    let m = ingest(&records).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        eps,
        ..PipelineConfig::default()
    };
    let s = build_structure(&m, &cfg).map_err(|e| e.to_string())?;
    let a = &s.assignment;
    let t0 = records.first().map_or(0, |r| r.timestamp_ms);
    let timeline = records
        .iter()
        .enumerate()
        .map(|(i, r)| Step {
            t_s: (r.timestamp_ms - t0) as f64 / 1000.0,
            indoor: r.label.is_some_and(|l| l.is_positive()),
            cluster: a.cluster_of(i),
            aps: r.readings.len(),
        })
        .collect();
    let clusters = a.num_clusters();
    serde_json::to_string(&WorldSummary {
        fingerprints: m.len(),
        aps: m.ap_count(),
        clusters,
        edges: s.graph.edge_count(),
        mean_cluster_size: m.len() as f64 / clusters.max(1) as f64,
        largest_cluster: (0..clusters).map(|c| a.size(c)).max().unwrap_or(0),
        timeline,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ScoredStep {
    t_s: f64,
    indoor: bool,
    graph: f64,
    fingerprint: f64,
}

#[derive(Serialize)]
struct ModeComparison {
    graph_auc: Option<f64>,
    fingerprint_auc: Option<f64>,
    graph_accuracy: f64,
    fingerprint_accuracy: f64,
    timeline: Vec<ScoredStep>,
}

/// Trains on one synthetic world, tests on another, with and without the
/// transition graph.
pub fn train_and_score_json(
    spec_text: &str,
    train_seed: u64,
    test_seed: u64,
    learner: &str,
) -> Result<String, String> {
    let learner: LearnerKind = learner
        .parse()
        .map_err(|e: wifio_core::Error| e.to_string())?;
    let train_m = ingest(&world(spec_text, train_seed)?).map_err(|e| e.to_string())?;
    let test_records = world(spec_text, test_seed)?;
    let test_m = ingest(&test_records).map_err(|e| e.to_string())?;
    let run = |mode| {
        let cfg = PipelineConfig {
            mode,
            learner,
            ..PipelineConfig::default()
        };
        run_pipeline(&train_m, &test_m, &cfg).map_err(|e| e.to_string())
    };
    let (_, gp, gr) = run(FeatureMode::Graph)?;
    let (_, fp, fr) = run(FeatureMode::Fingerprint)?;
    let t0 = test_records.first().map_or(0, |r| r.timestamp_ms);
    let timeline = test_records
        .iter()
        .enumerate()
        .map(|(i, r)| ScoredStep {
            t_s: (r.timestamp_ms - t0) as f64 / 1000.0,
            indoor: r.label.is_some_and(|l| l.is_positive()),
            graph: gp.fingerprint_scores[i],
            fingerprint: fp.fingerprint_scores[i],
        })
        .collect();
    serde_json::to_string(&ModeComparison {
        graph_auc: gr.report.auc,
        fingerprint_auc: fr.report.auc,
        graph_accuracy: gr.report.accuracy,
        fingerprint_accuracy: fr.report.accuracy,
        timeline,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = compareScans)]
pub fn compare_scans(a: &str, b: &str, adjacent: bool) -> Result<String, JsError> {
    compare_scans_json(a, b, adjacent).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulateWorld)]
pub fn simulate_world(spec_text: &str, seed: u32, eps: f64) -> Result<String, JsError> {
    simulate_world_json(spec_text, seed as u64, eps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = trainAndScore)]
pub fn train_and_score(
    spec_text: &str,
    train_seed: u32,
    test_seed: u32,
    learner: &str,
) -> Result<String, JsError> {
    train_and_score_json(spec_text, train_seed as u64, test_seed as u64, learner)
        .map_err(|e| JsError::new(&e))
}
