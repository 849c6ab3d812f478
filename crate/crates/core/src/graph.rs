//! Cluster transition graph.
//!
//! Nodes are clusters. Two distinct clusters are joined by an (unweighted)
//! edge when they hold fingerprints collected one right after the other.
//! Node weight is the cluster's fingerprint count.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};
use crate::model::FingerprintMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionGraph {
    adjacency: Vec<Vec<usize>>,
    node_members: Vec<Vec<usize>>,
}

/// Nodes within `d` hops of `center`, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: usize,
    pub d: usize,
    pub members: Vec<usize>,
}

/// Builds the transition graph of `m` under `assignment`. With `max_gap_ms`,
/// consecutive scans further apart in time than the gap add no edge.
pub fn build_graph(
    assignment: &ClusterAssignment,
    m: &FingerprintMatrix,
    max_gap_ms: Option<i64>,
) -> Result<TransitionGraph> {
    if assignment.len() != m.len() {
        return Err(Error::Coverage {
            assigned: assignment.len(),
            expected: m.len(),
        });
    }
    let nodes = assignment.num_clusters();
    let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes];
    let fps = m.fingerprints();
    for i in 1..m.len() {
        let (u, v) = (assignment.cluster_of(i - 1), assignment.cluster_of(i));
        if u == v {
            continue;
        }
        if let Some(gap) = max_gap_ms {
            if fps[i].timestamp_ms - fps[i - 1].timestamp_ms > gap {
                continue;
            }
        }
        edges[u].insert(v);
        edges[v].insert(u);
    }
    Ok(TransitionGraph {
        adjacency: edges.into_iter().map(|s| s.into_iter().collect()).collect(),
        node_members: (0..nodes).map(|c| assignment.members(c).to_vec()).collect(),
    })
}

impl TransitionGraph {
    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Sorted neighbor list of node `x`.
    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    pub fn weight(&self, x: usize) -> usize {
        self.node_members[x].len()
    }

    pub fn members(&self, x: usize) -> &[usize] {
        &self.node_members[x]
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    fn check(&self, x: usize) -> Result<()> {
        if x < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeRange {
                node: x,
                len: self.node_count(),
            })
        }
    }

    /// Breadth-first layers from `x`: `layers[k]` holds the nodes exactly `k`
    /// hops away, for `k <= max_d`.
    pub fn bfs_layers(&self, x: usize, max_d: usize) -> Result<Vec<Vec<usize>>> {
        self.check(x)?;
        let mut seen = vec![false; self.node_count()];
        seen[x] = true;
        let mut layers = vec![vec![x]];
        while layers.len() <= max_d {
            let mut next = Vec::new();
            for &u in layers.last().expect("non-empty") {
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layers.push(next);
        }
        Ok(layers)
    }

    pub fn neighborhood(&self, x: usize, d: usize) -> Result<Neighborhood> {
        let mut members: Vec<usize> = self.bfs_layers(x, d)?.into_iter().flatten().collect();
        members.sort_unstable();
        Ok(Neighborhood {
            center: x,
            d,
            members,
        })
    }

    /// Hop distance between two nodes by plain BFS, `None` if unreachable.
    pub fn hop_distance(&self, from: usize, to: usize) -> Result<Option<usize>> {
        self.check(from)?;
        self.check(to)?;
        let mut dist = vec![usize::MAX; self.node_count()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                return Ok(Some(dist[u]));
            }
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(None)
    }

    /// Writes one `u v` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Writes a `id weight size` table; `size` is the number of distinct
    /// access points seen across the node's fingerprints.
    pub fn write_node_table<W: Write>(
        &self,
        mut w: W,
        m: &FingerprintMatrix,
    ) -> std::io::Result<()> {
        writeln!(w, "id weight size")?;
        for x in 0..self.node_count() {
            let aps: BTreeSet<_> = self.node_members[x]
                .iter()
                .flat_map(|&i| m.fingerprint(i).keys())
                .collect();
            writeln!(w, "{x} {} {}", self.weight(x), aps.len())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ingest, ScanRecord};

    fn blank(n: usize, step: i64) -> FingerprintMatrix {
        let records: Vec<ScanRecord> = (0..n)
            .map(|i| ScanRecord {
                device_id: "d".into(),
                seq: i as u64,
                timestamp_ms: i as i64 * step,
                label: None,
                location: None,
                readings: vec![],
            })
            .collect();
        ingest(&records).unwrap()
    }

    fn graph_of(labels: &[usize]) -> TransitionGraph {
        let a = ClusterAssignment::from_labels(labels);
        build_graph(&a, &blank(labels.len(), 1000), None).unwrap()
    }

    #[test]
    fn sequence_edges_and_weights() {
        let g = graph_of(&[0, 0, 1, 0]);
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(g.weight(0), 3);
        assert_eq!(g.weight(1), 1);
    }

    #[test]
    fn single_cluster_has_no_edges() {
        let g = graph_of(&[0, 0, 0, 0]);
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn neighborhoods() {
        // path A-B-C
        let g = graph_of(&[0, 1, 2]);
        assert_eq!(g.neighborhood(0, 0).unwrap().members, vec![0]);
        assert_eq!(g.neighborhood(0, 2).unwrap().members, vec![0, 1, 2]);
        assert_eq!(g.neighborhood(0, 1).unwrap().members, vec![0, 1]);
        // star: center 0 with leaves 1..=5
        let g = graph_of(&[0, 1, 0, 2, 0, 3, 0, 4, 0, 5]);
        assert_eq!(g.degree(0), 5);
        assert_eq!(g.neighborhood(3, 2).unwrap().members.len(), 6);
    }

    #[test]
    fn node_range_error() {
        let g = graph_of(&[0, 1]);
        assert!(matches!(g.neighborhood(2, 1), Err(Error::NodeRange { .. })));
    }

    #[test]
    fn coverage_error() {
        let a = ClusterAssignment::from_labels(&[0, 1]);
        assert!(matches!(
            build_graph(&a, &blank(3, 1), None),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn gap_splitting() {
        let a = ClusterAssignment::from_labels(&[0, 1, 2]);
        let m = blank(3, 10_000);
        assert_eq!(build_graph(&a, &m, None).unwrap().edge_count(), 2);
        assert_eq!(build_graph(&a, &m, Some(5_000)).unwrap().edge_count(), 0);
        assert_eq!(build_graph(&a, &m, Some(10_000)).unwrap().edge_count(), 2);
    }

    #[test]
    fn exports() {
        let g = graph_of(&[0, 1, 0, 2]);
        let mut e = Vec::new();
        g.write_edge_list(&mut e).unwrap();
        assert_eq!(String::from_utf8(e).unwrap(), "0 1\n0 2\n");
        let mut t = Vec::new();
        g.write_node_table(&mut t, &blank(4, 1)).unwrap();
        assert_eq!(
            String::from_utf8(t).unwrap(),
            "id weight size\n0 2 0\n1 1 0\n2 1 0\n"
        );
    }
}
