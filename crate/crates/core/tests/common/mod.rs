//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wifio_core::model::{ApId, Reading, ScanRecord};
use wifio_core::{ingest, FingerprintMatrix, Label};

pub type Scan = Vec<(u32, i32)>;

pub fn bssid(ap: u32) -> ApId {
    let b = ap.to_be_bytes();
    ApId::parse(&format!(
        "0a:00:{:02x}:{:02x}:{:02x}:{:02x}",
        b[0], b[1], b[2], b[3]
    ))
    .unwrap()
}

pub fn record(seq: usize, readings: &[(u32, i32)]) -> ScanRecord {
    ScanRecord {
        device_id: "dev".into(),
        seq: seq as u64,
        timestamp_ms: seq as i64 * 3000,
        label: None,
        location: None,
        readings: readings
            .iter()
            .map(|&(ap, rssi_dbm)| Reading {
                bssid: bssid(ap),
                rssi_dbm,
            })
            .collect(),
    }
}

pub fn matrix(scans: &[Vec<(u32, i32)>]) -> FingerprintMatrix {
    let records: Vec<ScanRecord> = scans
        .iter()
        .enumerate()
        .map(|(i, s)| record(i, s))
        .collect();
    ingest(&records).unwrap()
}

/// A walker drifting along a line of `universe` APs; each scan hears the
/// APs near its position, with occasional jumps and runs of empty scans.
pub fn random_walk_scans(seed: u64, n: usize, universe: u32) -> Vec<Vec<(u32, i32)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = rng.random_range(0.0..universe as f64);
    let mut empty_run = 0usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if empty_run > 0 {
            empty_run -= 1;
            out.push(vec![]);
            continue;
        }
        if rng.random_bool(0.01) {
            empty_run = rng.random_range(1..6);
        }
        if rng.random_bool(0.02) {
            pos = rng.random_range(0.0..universe as f64);
        } else {
            pos = (pos + rng.random_range(-0.6..0.6)).clamp(0.0, universe as f64 - 1.0);
        }
        let mut scan = Vec::new();
        let lo = (pos - 6.0).max(0.0) as u32;
        let hi = ((pos + 6.0) as u32).min(universe - 1);
        for ap in lo..=hi {
            if rng.random_bool(0.2) {
                continue;
            }
            let dist = (ap as f64 - pos).abs();
            let dbm = -40.0 - 6.0 * dist + rng.random_range(-3.0..3.0);
            scan.push((ap, dbm.round() as i32));
        }
        out.push(scan);
    }
    out
}

/// A pair of sparse fingerprints with 5 to 15 APs each, about 30% of the
/// smaller one shared.
pub fn random_sparse_pair(rng: &mut ChaCha8Rng) -> (Scan, Scan) {
    let kx = rng.random_range(5..=15);
    let ky = rng.random_range(5..=15);
    let shared = ((kx.min(ky) as f64 * 0.3).round() as usize).max(1);
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut next = 0u32;
    // coarse dBm grid so equal values (ties) are common
    let dbm = |rng: &mut ChaCha8Rng| -30 - 2 * rng.random_range(0..30);
    for _ in 0..shared {
        x.push((next, dbm(rng)));
        y.push((next, dbm(rng)));
        next += 1;
    }
    for _ in shared..kx {
        x.push((next, dbm(rng)));
        next += 1;
    }
    for _ in shared..ky {
        y.push((next, dbm(rng)));
        next += 1;
    }
    (x, y)
}

fn lin(dbm: i32) -> f64 {
    10f64.powf(dbm as f64 / 10.0)
}

/// Fractional descending ranks by counting: 1 + #greater + (#equal - 1) / 2.
fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let greater = v.iter().filter(|&&b| b > a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            1.0 + greater + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Distance with absent APs materialised at half the smallest observed
/// power, ranked numerically over the union.
pub fn oracle_distance(x: &[(u32, i32)], y: &[(u32, i32)], i: usize, j: usize) -> f64 {
    match (x.is_empty(), y.is_empty()) {
        (true, true) => return if i.abs_diff(j) <= 1 { 0.0 } else { 2.0 },
        (true, false) | (false, true) => return 2.0,
        _ => {}
    }
    let px: BTreeMap<u32, f64> = x.iter().map(|&(a, d)| (a, lin(d))).collect();
    let py: BTreeMap<u32, f64> = y.iter().map(|&(a, d)| (a, lin(d))).collect();
    if !px.keys().any(|a| py.contains_key(a)) {
        return 2.0;
    }
    if px.len() == 1 && py.len() == 1 {
        return 0.0;
    }
    let union: BTreeSet<u32> = px.keys().chain(py.keys()).copied().collect();
    let smallest = px
        .values()
        .chain(py.values())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let eps = smallest / 2.0;
    let vx: Vec<f64> = union
        .iter()
        .map(|a| px.get(a).copied().unwrap_or(eps))
        .collect();
    let vy: Vec<f64> = union
        .iter()
        .map(|a| py.get(a).copied().unwrap_or(eps))
        .collect();
    let (rx, ry) = (counting_ranks(&vx), counting_ranks(&vy));
    let n = union.len() as f64;
    let sum: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    let rho = 1.0 - 6.0 * sum / (n * (n * n - 1.0));
    (1.0 - rho).clamp(0.0, 2.0)
}

/// Relabels a partition by order of first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Connected components of the graph with an edge wherever `close(i, j)`,
/// over all pairs.
pub fn components_oracle(n: usize, close: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if close(i, j) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|i| root(&mut parent, i)).collect();
    canonical(&labels)
}

/// Edge set from every consecutive pair of scans in different clusters.
pub fn edges_oracle(labels: &[usize]) -> BTreeSet<(usize, usize)> {
    labels
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
        .collect()
}

/// Hop distances from `x` over an explicit edge list.
pub fn hops_oracle(nodes: usize, edges: &BTreeSet<(usize, usize)>, x: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; nodes];
    dist[x] = Some(0);
    let mut queue = VecDeque::from([x]);
    while let Some(u) = queue.pop_front() {
        for &(a, b) in edges {
            let v = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// The four feature families computed by materialising each neighbourhood's
/// fingerprint pool: node count, mean dBm over all readings, readings per
/// fingerprint, fingerprints per node.
pub fn pool_features(
    scans: &[Vec<(u32, i32)>],
    labels: &[usize],
    hops: &[Option<usize>],
    d: usize,
) -> (f64, f64, f64, f64) {
    let pool_nodes: BTreeSet<usize> = (0..hops.len())
        .filter(|&y| hops[y].is_some_and(|h| h <= d))
        .collect();
    let pool: Vec<&Vec<(u32, i32)>> = scans
        .iter()
        .zip(labels)
        .filter(|(_, c)| pool_nodes.contains(c))
        .map(|(s, _)| s)
        .collect();
    let readings: Vec<i32> = pool.iter().flat_map(|s| s.iter().map(|r| r.1)).collect();
    let power = if readings.is_empty() {
        -100.0
    } else {
        readings.iter().map(|&r| r as f64).sum::<f64>() / readings.len() as f64
    };
    (
        pool_nodes.len() as f64,
        power,
        readings.len() as f64 / pool.len() as f64,
        pool.len() as f64 / pool_nodes.len() as f64,
    )
}

/// Probability that a random positive outscores a random negative, by
/// enumerating every pair.
pub fn auc_oracle(scored: &[(f64, Label)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for &(sp, lp) in scored {
        if lp != Label::Indoor {
            continue;
        }
        for &(sn, ln) in scored {
            if ln != Label::Outdoor {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random labelled scores with coarse values so ties occur.
pub fn random_scored(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, Label)> {
    let mut v: Vec<(f64, Label)> = (0..n)
        .map(|_| {
            let l = if rng.random_bool(0.6) {
                Label::Indoor
            } else {
                Label::Outdoor
            };
            (rng.random_range(0..20) as f64 / 20.0, l)
        })
        .collect();
    v[0].1 = Label::Indoor;
    v[1].1 = Label::Outdoor;
    v
}
