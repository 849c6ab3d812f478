//! Density clustering of fingerprints.
//!
//! With `min_pts = 1` every fingerprint is a core point, so DBSCAN clusters are
//! exactly the connected components of the graph linking fingerprints within
//! `eps` of each other. That case runs one region query per fingerprint and
//! merges neighbors with a union-find. Larger `min_pts` falls back to classic
//! DBSCAN expansion; its noise points become singleton clusters so that every
//! fingerprint is assigned.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{validate_eps, FingerprintIndex, QueryScratch};
use crate::model::FingerprintMatrix;

pub const DEFAULT_EPS: f64 = 0.22;
pub const DEFAULT_MIN_PTS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        validate_eps(self.eps)?;
        if self.min_pts < 1 {
            return Err(Error::Config("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Total assignment of fingerprints to clusters `0..C`, numbered by each
/// cluster's smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    cluster_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClusterAssignment {
    /// Builds an assignment from arbitrary per-fingerprint labels, renumbering
    /// clusters in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut cluster_of = Vec::with_capacity(labels.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            let c = *remap.entry(l).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            cluster_of.push(c);
            members[c].push(i);
        }
        Self {
            cluster_of,
            members,
        }
    }

    /// Every fingerprint in its own cluster.
    pub fn singletons(len: usize) -> Self {
        Self {
            cluster_of: (0..len).collect(),
            members: (0..len).map(|i| vec![i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_of.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    pub fn size(&self, c: usize) -> usize {
        self.members[c].len()
    }

    pub fn mean_cluster_size(&self) -> f64 {
        if self.members.is_empty() {
            0.0
        } else {
            self.len() as f64 / self.members.len() as f64
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

const QUERY_BLOCK: usize = 512;

/// Forward neighbors (`i > q`) of every `q` in `block`.
fn forward_neighbors(
    index: &FingerprintIndex,
    block: std::ops::Range<usize>,
    eps: f64,
) -> Vec<Vec<usize>> {
    let run = |scratch: &mut (QueryScratch, Vec<usize>), q: usize| {
        let (s, out) = scratch;
        index
            .region_query_with(q, eps, s, out)
            .expect("query in range with validated eps");
        out.iter().copied().filter(|&i| i > q).collect::<Vec<_>>()
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        block
            .into_par_iter()
            .map_init(|| (QueryScratch::default(), Vec::new()), run)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = (QueryScratch::default(), Vec::new());
        block.map(|q| run(&mut scratch, q)).collect()
    }
}

fn connected_components(index: &FingerprintIndex, eps: f64) -> Vec<usize> {
    let n = index.len();
    let mut uf = UnionFind::new(n);
    let mut start = 0;
    while start < n {
        let end = (start + QUERY_BLOCK).min(n);
        for (q, neighbors) in (start..end).zip(forward_neighbors(index, start..end, eps)) {
            for i in neighbors {
                uf.union(q, i);
            }
        }
        start = end;
    }
    (0..n).map(|i| uf.find(i)).collect()
}

fn dbscan(index: &FingerprintIndex, params: ClusterParams) -> Vec<usize> {
    const UNVISITED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let n = index.len();
    let mut label = vec![UNVISITED; n];
    let mut scratch = QueryScratch::default();
    let mut neighbors = Vec::new();
    let mut next = 0;
    for p in 0..n {
        if label[p] != UNVISITED {
            continue;
        }
        index
            .region_query_with(p, params.eps, &mut scratch, &mut neighbors)
            .expect("validated");
        if neighbors.len() < params.min_pts {
            label[p] = NOISE;
            continue;
        }
        let c = next;
        next += 1;
        label[p] = c;
        let mut queue: Vec<usize> = neighbors.clone();
        while let Some(q) = queue.pop() {
            if label[q] == NOISE {
                label[q] = c;
            }
            if label[q] != UNVISITED {
                continue;
            }
            label[q] = c;
            index
                .region_query_with(q, params.eps, &mut scratch, &mut neighbors)
                .expect("validated");
            if neighbors.len() >= params.min_pts {
                queue.extend(neighbors.iter().copied().filter(|&i| label[i] >= NOISE));
            }
        }
    }
    // noise becomes singleton clusters
    for (i, l) in label.iter_mut().enumerate() {
        if *l == NOISE {
            *l = next + i;
        }
    }
    label
}

/// Clusters the fingerprints of `m` using a prebuilt index over `m`.
pub fn cluster(
    m: &FingerprintMatrix,
    params: ClusterParams,
    index: &FingerprintIndex,
) -> Result<ClusterAssignment> {
    params.validate()?;
    if index.len() != m.len() {
        return Err(Error::Coverage {
            assigned: index.len(),
            expected: m.len(),
        });
    }
    let labels = if params.min_pts == 1 {
        connected_components(index, params.eps)
    } else {
        dbscan(index, params)
    };
    Ok(ClusterAssignment::from_labels(&labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct AssignmentLine {
    seq: usize,
    cluster: usize,
}

/// Writes `{seq, cluster}` lines.
pub fn write_assignment<W: Write>(mut w: W, a: &ClusterAssignment) -> std::io::Result<()> {
    for (seq, &cluster) in a.labels().iter().enumerate() {
        serde_json::to_writer(&mut w, &AssignmentLine { seq, cluster })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_assignment<R: BufRead>(r: R) -> Result<ClusterAssignment> {
    let mut labels = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: AssignmentLine = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if l.seq != labels.len() {
            return Err(Error::Format(format!(
                "line {}: expected seq {}, found {}",
                lineno + 1,
                labels.len(),
                l.seq
            )));
        }
        labels.push(l.cluster);
    }
    Ok(ClusterAssignment::from_labels(&labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ingest, ApId, Reading, ScanRecord};

    fn matrix(scans: &[&[(u8, i32)]]) -> FingerprintMatrix {
        let records: Vec<ScanRecord> = scans
            .iter()
            .enumerate()
            .map(|(i, s)| ScanRecord {
                device_id: "d".into(),
                seq: i as u64,
                timestamp_ms: i as i64,
                label: None,
                location: None,
                readings: s
                    .iter()
                    .map(|&(ap, rssi_dbm)| Reading {
                        bssid: ApId::parse(&format!("00:00:00:00:00:{ap:02x}")).unwrap(),
                        rssi_dbm,
                    })
                    .collect(),
            })
            .collect();
        ingest(&records).unwrap()
    }

    fn run(m: &FingerprintMatrix, params: ClusterParams) -> ClusterAssignment {
        cluster(m, params, &FingerprintIndex::build(m)).unwrap()
    }

    #[test]
    fn defaults() {
        let p = ClusterParams::default();
        assert_eq!((p.eps, p.min_pts), (0.22, 1));
    }

    #[test]
    fn chain_is_one_cluster() {
        // one adjacent swap apart is 0.2, two swaps is 0.4
        let m = matrix(&[
            &[(1, -40), (2, -50), (3, -60), (4, -70)],
            &[(1, -50), (2, -40), (3, -60), (4, -70)],
            &[(1, -50), (2, -40), (3, -70), (4, -60)],
        ]);
        let idx = FingerprintIndex::build(&m);
        assert_eq!(idx.region_query(0, 0.22).unwrap(), vec![0, 1]);
        assert_eq!(idx.region_query(2, 0.22).unwrap(), vec![1, 2]);
        let a = run(&m, ClusterParams::default());
        assert_eq!(a.num_clusters(), 1);
    }

    #[test]
    fn empty_run_is_one_cluster() {
        let m = matrix(&[&[(1, -40)], &[], &[], &[], &[], &[(2, -40)]]);
        let a = run(&m, ClusterParams::default());
        assert_eq!(a.labels(), &[0, 1, 1, 1, 1, 2]);
        assert_eq!(a.size(1), 4);
    }

    #[test]
    fn separated_empty_runs_split() {
        let m = matrix(&[&[], &[(1, -40)], &[]]);
        let a = run(&m, ClusterParams::default());
        assert_eq!(a.num_clusters(), 3);
    }

    #[test]
    fn min_pts_noise_becomes_singletons() {
        let m = matrix(&[&[(1, -40)], &[(1, -41)], &[(1, -42)], &[(5, -40)]]);
        let a = run(
            &m,
            ClusterParams {
                eps: 0.22,
                min_pts: 3,
            },
        );
        assert_eq!(a.labels(), &[0, 0, 0, 1]);
        let a = run(
            &m,
            ClusterParams {
                eps: 0.22,
                min_pts: 4,
            },
        );
        assert_eq!(a.num_clusters(), 4);
    }

    #[test]
    fn invalid_params() {
        let m = matrix(&[&[(1, -40)]]);
        let idx = FingerprintIndex::build(&m);
        let bad = ClusterParams {
            eps: 2.0,
            min_pts: 1,
        };
        assert!(matches!(cluster(&m, bad, &idx), Err(Error::Config(_))));
        let bad = ClusterParams {
            eps: 0.2,
            min_pts: 0,
        };
        assert!(matches!(cluster(&m, bad, &idx), Err(Error::Config(_))));
    }

    #[test]
    fn assignment_file_round_trip() {
        let a = ClusterAssignment::from_labels(&[4, 4, 9, 4, 1]);
        assert_eq!(a.labels(), &[0, 0, 1, 0, 2]);
        let mut buf = Vec::new();
        write_assignment(&mut buf, &a).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("{\"seq\":0,\"cluster\":0}\n"));
        assert_eq!(read_assignment(buf.as_slice()).unwrap(), a);
    }
}
